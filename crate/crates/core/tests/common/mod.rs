#![allow(dead_code)]

pub mod rayleigh_lamb {
    //! Isotropic free-plate roots by direct bisection of the Rayleigh–Lamb
    //! equations, written in a form that stays real for all phase velocities.

    pub struct Plate {
        pub cl: f64,
        pub ct: f64,
        /// half thickness, m
        pub h: f64,
    }

    impl Plate {
        pub fn new(e: f64, nu: f64, rho: f64, thickness: f64) -> Plate {
            let mu = e / (2.0 * (1.0 + nu));
            let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
            Plate { cl: ((lambda + 2.0 * mu) / rho).sqrt(), ct: (mu / rho).sqrt(), h: thickness / 2.0 }
        }

        /// `cos(xh)`, `sin(xh)/x` and `x sin(xh)` for `x² = s`, valid for either sign of `s`.
        fn trig(&self, s: f64) -> (f64, f64, f64) {
            let h = self.h;
            if s >= 0.0 {
                let x = s.sqrt();
                let sinc = if x * h < 1e-12 { h } else { (x * h).sin() / x };
                ((x * h).cos(), sinc, x * (x * h).sin())
            } else {
                let x = (-s).sqrt();
                let sinhc = if x * h < 1e-12 { h } else { (x * h).sinh() / x };
                ((x * h).cosh(), sinhc, -x * (x * h).sinh())
            }
        }

        fn parts(&self, f: f64, c: f64) -> (f64, f64, (f64, f64, f64), (f64, f64, f64)) {
            let w = 2.0 * std::f64::consts::PI * f;
            let k = w / c;
            let p2 = (w / self.cl).powi(2) - k * k;
            let q2 = (w / self.ct).powi(2) - k * k;
            (k * k, (q2 - k * k).powi(2), self.trig(p2), self.trig(q2))
        }

        pub fn symmetric(&self, f: f64, c: f64) -> f64 {
            let (k2, b, (cp, _, pp), (cq, sq, _)) = self.parts(f, c);
            b * cp * sq + 4.0 * k2 * pp * cq
        }

        pub fn antisymmetric(&self, f: f64, c: f64) -> f64 {
            let (k2, b, (cp, sp, _), (cq, _, pq)) = self.parts(f, c);
            b * sp * cq + 4.0 * k2 * pq * cp
        }

        fn roots_of(&self, g: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> Vec<f64> {
            let mut out = Vec::new();
            let mut a = lo;
            let mut fa = g(a);
            while a < hi {
                let b = (a + step).min(hi);
                let fb = g(b);
                if fa == 0.0 {
                    out.push(a);
                } else if fa.signum() != fb.signum() {
                    let (mut x0, mut x1, mut f0) = (a, b, fa);
                    for _ in 0..200 {
                        let m = 0.5 * (x0 + x1);
                        let fm = g(m);
                        if fm.signum() == f0.signum() {
                            x0 = m;
                            f0 = fm;
                        } else {
                            x1 = m;
                        }
                        if x1 - x0 < 1e-12 * m {
                            break;
                        }
                    }
                    out.push(0.5 * (x0 + x1));
                }
                a = b;
                fa = fb;
            }
            out
        }

        /// Symmetric-family roots in `[lo, hi]` m/s.
        pub fn symmetric_roots(&self, f: f64, lo: f64, hi: f64) -> Vec<f64> {
            self.roots_of(|c| self.symmetric(f, c), lo, hi, 0.5)
        }

        pub fn antisymmetric_roots(&self, f: f64, lo: f64, hi: f64) -> Vec<f64> {
            self.roots_of(|c| self.antisymmetric(f, c), lo, hi, 0.5)
        }

        pub fn s0(&self, f: f64) -> f64 {
            self.symmetric_roots(f, 50.0, 12000.0)[0]
        }

        pub fn a0(&self, f: f64) -> f64 {
            self.antisymmetric_roots(f, 50.0, 12000.0)[0]
        }

        /// `dω/dk` of a root branch by central differences.
        pub fn group_velocity(&self, f: f64, branch: impl Fn(&Plate, f64) -> f64) -> f64 {
            let df = f * 1e-4;
            let w = |f: f64| 2.0 * std::f64::consts::PI * f;
            let (c1, c2) = (branch(self, f - df), branch(self, f + df));
            (w(f + df) - w(f - df)) / (w(f + df) / c2 - w(f - df) / c1)
        }
    }
}

pub mod nn {
    //! Direct nested-loop evaluation of the supported layer kinds.

    use polarwave::vae_infer::{Activation, Layer, LayerSpec, Tensor};

    pub fn dense(x: &[f64], w: &[f32], b: &[f32], n_in: usize, n_out: usize) -> Vec<f64> {
        let mut y = vec![0.0; n_out];
        for o in 0..n_out {
            let mut acc = b[o] as f64;
            for i in 0..n_in {
                acc += w[o * n_in + i] as f64 * x[i];
            }
            y[o] = acc;
        }
        y
    }

    /// Cross-correlation, weight `[out, in, k, k]`.
    #[allow(clippy::too_many_arguments)]
    pub fn conv(
        x: &[f64],
        (c, h, wd): (usize, usize, usize),
        w: &[f32],
        b: &[f32],
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> (Vec<f64>, usize, usize) {
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (wd + 2 * pad - k) / stride + 1;
        let mut y = vec![0.0; out_c * oh * ow];
        for o in 0..out_c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b[o] as f64;
                    for ci in 0..c {
                        for i in 0..k {
                            for j in 0..k {
                                let iy = (oy * stride + i) as isize - pad as isize;
                                let ix = (ox * stride + j) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                    continue;
                                }
                                acc += w[((o * c + ci) * k + i) * k + j] as f64
                                    * x[(ci * h + iy as usize) * wd + ix as usize];
                            }
                        }
                    }
                    y[(o * oh + oy) * ow + ox] = acc;
                }
            }
        }
        (y, oh, ow)
    }

    /// Transposed convolution by scattering each input sample, weight `[in, out, k, k]`.
    #[allow(clippy::too_many_arguments)]
    pub fn conv_transpose(
        x: &[f64],
        (c, h, wd): (usize, usize, usize),
        w: &[f32],
        b: &[f32],
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
        out_pad: usize,
    ) -> (Vec<f64>, usize, usize) {
        let oh = (h - 1) * stride + k + out_pad - 2 * pad;
        let ow = (wd - 1) * stride + k + out_pad - 2 * pad;
        let mut y = vec![0.0; out_c * oh * ow];
        for o in 0..out_c {
            for v in &mut y[o * oh * ow..(o + 1) * oh * ow] {
                *v = b[o] as f64;
            }
        }
        for ci in 0..c {
            for iy in 0..h {
                for ix in 0..wd {
                    let v = x[(ci * h + iy) * wd + ix];
                    for o in 0..out_c {
                        for i in 0..k {
                            for j in 0..k {
                                let oy = (iy * stride + i) as isize - pad as isize;
                                let ox = (ix * stride + j) as isize - pad as isize;
                                if oy < 0 || ox < 0 || oy >= oh as isize || ox >= ow as isize {
                                    continue;
                                }
                                y[(o * oh + oy as usize) * ow + ox as usize] +=
                                    v * w[((ci * out_c + o) * k + i) * k + j] as f64;
                            }
                        }
                    }
                }
            }
        }
        (y, oh, ow)
    }

    pub fn run(layers: &[Layer], input: &Tensor) -> Tensor {
        let mut shape = input.shape.clone();
        let mut x = input.data.clone();
        for l in layers {
            match l.spec {
                LayerSpec::Dense { in_features, out_features, .. } => {
                    x = dense(&x, &l.weight, &l.bias, in_features, out_features);
                    shape = vec![out_features];
                }
                LayerSpec::Conv { out_channels, kernel, stride, padding, .. } => {
                    let (y, oh, ow) =
                        conv(&x, (shape[0], shape[1], shape[2]), &l.weight, &l.bias, out_channels, kernel, stride, padding);
                    x = y;
                    shape = vec![out_channels, oh, ow];
                }
                LayerSpec::ConvTranspose { out_channels, kernel, stride, padding, output_padding, .. } => {
                    let (y, oh, ow) = conv_transpose(
                        &x,
                        (shape[0], shape[1], shape[2]),
                        &l.weight,
                        &l.bias,
                        out_channels,
                        kernel,
                        stride,
                        padding,
                        output_padding,
                    );
                    x = y;
                    shape = vec![out_channels, oh, ow];
                }
                LayerSpec::Activation { function: Activation::Relu, .. } => x.iter_mut().for_each(|v| *v = v.max(0.0)),
                LayerSpec::Activation { function: Activation::Sigmoid, .. } => {
                    x.iter_mut().for_each(|v| *v = 1.0 / (1.0 + (-*v).exp()))
                }
                LayerSpec::Reshape { shape: ref s, .. } => shape = s.clone(),
            }
        }
        Tensor { shape, data: x }
    }
}

pub mod toy {
    //! Random small networks exercising one layer kind at a time.

    use polarwave::vae_infer::{Activation, Layer, LayerSpec, Tensor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Kind {
        Dense,
        Conv,
        ConvTranspose,
        Activation,
        Reshape,
    }

    pub const KINDS: [Kind; 5] = [Kind::Dense, Kind::Conv, Kind::ConvTranspose, Kind::Activation, Kind::Reshape];

    fn tensors(rng: &mut ChaCha8Rng, spec: LayerSpec) -> Layer {
        let (nw, nb) = spec.param_counts();
        let w = (0..nw).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let b = (0..nb).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        Layer::new(spec, w, b).unwrap()
    }

    fn name(i: usize) -> String {
        format!("toy.{i}")
    }

    /// Up to four layers dominated by `kind`, with ≤ 8 channels and ≤ 16×16
    /// feature maps, plus a matching random input.
    pub fn network(kind: Kind, seed: u64) -> (Vec<Layer>, Tensor) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_layers = rng.random_range(1..=4usize);
        let mut layers = Vec::new();
        let input_shape: Vec<usize>;
        match kind {
            Kind::Dense => {
                let mut n = rng.random_range(1..=32usize);
                input_shape = vec![n];
                for i in 0..n_layers {
                    let m = rng.random_range(1..=32usize);
                    layers.push(tensors(&mut rng, LayerSpec::Dense { name: name(i), in_features: n, out_features: m }));
                    n = m;
                }
            }
            Kind::Conv => {
                let mut c = rng.random_range(1..=8usize);
                let mut s = rng.random_range(5..=16usize);
                input_shape = vec![c, s, s];
                for i in 0..n_layers {
                    let k = rng.random_range(1..=3usize.min(s));
                    let stride = rng.random_range(1..=2usize);
                    let padding = rng.random_range(0..k);
                    let o = rng.random_range(1..=8usize);
                    layers.push(tensors(
                        &mut rng,
                        LayerSpec::Conv { name: name(i), in_channels: c, out_channels: o, kernel: k, stride, padding },
                    ));
                    s = (s + 2 * padding - k) / stride + 1;
                    c = o;
                    if s < 3 {
                        break;
                    }
                }
            }
            Kind::ConvTranspose => {
                let mut c = rng.random_range(1..=8usize);
                let mut s = rng.random_range(1..=4usize);
                input_shape = vec![c, s, s];
                for i in 0..n_layers {
                    let k = rng.random_range(1..=3usize);
                    let stride = rng.random_range(1..=2usize);
                    let padding = rng.random_range(0..k);
                    let output_padding = rng.random_range(0..stride);
                    let next = (s - 1) * stride + k + output_padding;
                    if next <= 2 * padding || next - 2 * padding > 16 {
                        break;
                    }
                    let o = rng.random_range(1..=8usize);
                    layers.push(tensors(
                        &mut rng,
                        LayerSpec::ConvTranspose {
                            name: name(i),
                            in_channels: c,
                            out_channels: o,
                            kernel: k,
                            stride,
                            padding,
                            output_padding,
                        },
                    ));
                    s = next - 2 * padding;
                    c = o;
                }
                if layers.is_empty() {
                    layers.push(tensors(
                        &mut rng,
                        LayerSpec::ConvTranspose {
                            name: name(0),
                            in_channels: c,
                            out_channels: 2,
                            kernel: 3,
                            stride: 2,
                            padding: 1,
                            output_padding: 1,
                        },
                    ));
                }
            }
            Kind::Activation => {
                let c = rng.random_range(1..=8usize);
                let s = rng.random_range(1..=16usize);
                input_shape = vec![c, s, s];
                for i in 0..n_layers {
                    let function = if rng.random_bool(0.5) { Activation::Relu } else { Activation::Sigmoid };
                    layers.push(tensors(&mut rng, LayerSpec::Activation { name: name(i), function }));
                }
            }
            Kind::Reshape => {
                let c = rng.random_range(1..=8usize);
                let s = rng.random_range(1..=8usize);
                input_shape = vec![c, s, s];
                let n = c * s * s;
                layers.push(tensors(&mut rng, LayerSpec::Reshape { name: name(0), shape: vec![n] }));
                let m = rng.random_range(1..=16usize);
                layers.push(tensors(&mut rng, LayerSpec::Dense { name: name(1), in_features: n, out_features: m }));
                layers.push(tensors(&mut rng, LayerSpec::Reshape { name: name(2), shape: vec![m, 1, 1] }));
                let o = rng.random_range(1..=8usize);
                layers.push(tensors(
                    &mut rng,
                    LayerSpec::ConvTranspose {
                        name: name(3),
                        in_channels: m,
                        out_channels: o,
                        kernel: 3,
                        stride: 2,
                        padding: 0,
                        output_padding: 1,
                    },
                ));
            }
        }
        let n: usize = input_shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        (layers, Tensor::new(input_shape, data))
    }
}
