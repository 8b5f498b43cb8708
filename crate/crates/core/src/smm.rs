//! Partial-wave solution of the Christoffel equation and stiffness matrix
//! method (SMM) assembly for a layered plate.
//!
//! Coordinates: `x1` is the wave-vector direction, `x3` the plate normal.
//! Each layer's stiffness maps face displacements `[u(bottom); u(top)]` to
//! the stress vectors `[σ_i3(bottom); σ_i3(top)]`, both ordered `(1, 2, 3)`.
//! Layers are listed bottom to top.

use std::f64::consts::PI;

use nalgebra::{Complex, ComplexField, Matrix3, Matrix6, SMatrix, Vector3};

use crate::material::{voigt, RotatedStiffness};

pub type C64 = Complex<f64>;

/// Relative spacing below which two `α²` roots are treated as one double root.
pub const DEGENERATE_ROOT_TOL: f64 = 1e-6;

/// Displacement-matrix condition number above which a layer is flagged.
pub const CONDITION_LIMIT: f64 = 1e12;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveState {
    /// Hz
    pub f: f64,
    /// rad/s
    pub omega: f64,
    /// m/s
    pub cp: f64,
    /// rad/m
    pub xi: f64,
    /// radians
    pub prop_angle: f64,
}

impl WaveState {
    pub fn new(f: f64, cp: f64, prop_angle: f64) -> Self {
        let omega = 2.0 * PI * f;
        WaveState { f, omega, cp, xi: omega / cp, prop_angle }
    }
}

/// Determinant of the Christoffel matrix as a polynomial in `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChristoffelPolynomial {
    /// Coefficients of `α⁰ … α⁶`.
    pub coeffs: [f64; 7],
}

impl ChristoffelPolynomial {
    /// Coefficients of the cubic in `α²`, ascending.
    pub fn cubic(&self) -> [f64; 4] {
        [self.coeffs[0], self.coeffs[2], self.coeffs[4], self.coeffs[6]]
    }

    pub fn eval(&self, alpha: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * alpha + c)
    }
}

/// Polynomial in `α` with at most degree 6; index = power.
type Poly = [f64; 7];

fn pmul(a: &Poly, b: &Poly) -> Poly {
    let mut out = [0.0; 7];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            if i + j < 7 {
                out[i + j] += x * y;
            }
        }
    }
    out
}

fn padd(a: &Poly, b: &Poly, sign: f64) -> Poly {
    let mut out = *a;
    for (o, &y) in out.iter_mut().zip(b) {
        *o += sign * y;
    }
    out
}

/// Christoffel matrix entries as polynomials in `α`, in the order
/// `(Γ11, Γ12, Γ13, Γ22, Γ23, Γ33)`.
fn christoffel_entries(c: &RotatedStiffness, rho: f64, cp: f64) -> [Poly; 6] {
    let rc2 = rho * cp * cp;
    let mut g11 = [0.0; 7];
    g11[0] = c.at(1, 1) - rc2;
    g11[2] = c.at(5, 5);
    let mut g12 = [0.0; 7];
    g12[0] = c.at(1, 6);
    g12[2] = c.at(4, 5);
    let mut g13 = [0.0; 7];
    g13[1] = c.at(1, 3) + c.at(5, 5);
    let mut g22 = [0.0; 7];
    g22[0] = c.at(6, 6) - rc2;
    g22[2] = c.at(4, 4);
    let mut g23 = [0.0; 7];
    g23[1] = c.at(3, 6) + c.at(4, 5);
    let mut g33 = [0.0; 7];
    g33[0] = c.at(5, 5) - rc2;
    g33[2] = c.at(3, 3);
    [g11, g12, g13, g22, g23, g33]
}

/// Expands `det Γ(α)` for the monoclinic Christoffel matrix.
pub fn christoffel_polynomial(c: &RotatedStiffness, rho: f64, cp: f64) -> ChristoffelPolynomial {
    let [g11, g12, g13, g22, g23, g33] = christoffel_entries(c, rho, cp);
    // det = g11 g22 g33 + 2 g12 g23 g13 − g11 g23² − g22 g13² − g33 g12²
    let t1 = pmul(&pmul(&g11, &g22), &g33);
    let t2 = pmul(&pmul(&g12, &g23), &g13);
    let t3 = pmul(&g11, &pmul(&g23, &g23));
    let t4 = pmul(&g22, &pmul(&g13, &g13));
    let t5 = pmul(&g33, &pmul(&g12, &g12));
    let mut p = padd(&t1, &t2, 2.0);
    p = padd(&p, &t3, -1.0);
    p = padd(&p, &t4, -1.0);
    p = padd(&p, &t5, -1.0);
    ChristoffelPolynomial { coeffs: p }
}

/// `Γ(α)` evaluated at a complex `α`.
pub fn christoffel_matrix(c: &RotatedStiffness, rho: f64, cp: f64, alpha: C64) -> Matrix3<C64> {
    let rc2 = rho * cp * cp;
    let a2 = alpha * alpha;
    let g11 = a2 * c.at(5, 5) + (c.at(1, 1) - rc2);
    let g12 = a2 * c.at(4, 5) + c.at(1, 6);
    let g13 = alpha * (c.at(1, 3) + c.at(5, 5));
    let g22 = a2 * c.at(4, 4) + (c.at(6, 6) - rc2);
    let g23 = alpha * (c.at(3, 6) + c.at(4, 5));
    let g33 = a2 * c.at(3, 3) + (c.at(5, 5) - rc2);
    Matrix3::new(g11, g12, g13, g12, g22, g23, g13, g23, g33)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialWave {
    /// `ζ3 / ξ`
    pub alpha: C64,
    /// Null vector of `Γ(α)`, scaled so its largest component is 1.
    pub polarization: Vector3<C64>,
    /// `(σ13, σ23, σ33)` per unit `iξ` and unit amplitude.
    pub stress: Vector3<C64>,
}

/// Six partial waves ordered `(+α₁, −α₁, +α₂, −α₂, +α₃, −α₃)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialWaves {
    pub waves: [PartialWave; 6],
    /// Two `α²` roots merged into a double root.
    pub degenerate: bool,
}

/// Roots of `a0 + a1 x + a2 x² + a3 x³`.
fn cubic_roots(a: [f64; 4]) -> [C64; 3] {
    let [a0, a1, a2, a3] = a;
    let (b0, b1, b2) = (a0 / a3, a1 / a3, a2 / a3);
    let companion = Matrix3::new(-b2, -b1, -b0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    let eig = companion.complex_eigenvalues();
    let p = |x: C64| ((x + b2) * x + b1) * x + b0;
    let dp = |x: C64| (x * 3.0 + 2.0 * b2) * x + b1;
    let mut roots = [eig[0], eig[1], eig[2]];
    for r in roots.iter_mut() {
        // Newton polish, kept only while the residual drops.
        for _ in 0..4 {
            let d = dp(*r);
            if d.norm() == 0.0 {
                break;
            }
            let next = *r - p(*r) / d;
            if p(next).norm() < p(*r).norm() {
                *r = next;
            } else {
                break;
            }
        }
    }
    roots
}

/// `+α`: positive imaginary part, or positive real part when purely real.
fn plus_root(s: C64) -> C64 {
    let a = s.sqrt();
    if a.im < 0.0 || (a.im == 0.0 && a.re < 0.0) {
        -a
    } else {
        a
    }
}

fn cross(a: &Vector3<C64>, b: &Vector3<C64>) -> Vector3<C64> {
    Vector3::new(a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])
}

fn normalize_max(v: Vector3<C64>) -> Vector3<C64> {
    let idx = (0..3).max_by(|&i, &j| v[i].norm().total_cmp(&v[j].norm())).unwrap();
    let m = v[idx];
    if m.norm() == 0.0 {
        v
    } else {
        v / m
    }
}

fn rows(g: &Matrix3<C64>) -> [Vector3<C64>; 3] {
    [0, 1, 2].map(|i| Vector3::new(g[(i, 0)], g[(i, 1)], g[(i, 2)]))
}

/// Null vector of a rank-2 Christoffel matrix via the best-conditioned row cross product.
fn simple_null_vector(g: &Matrix3<C64>) -> Vector3<C64> {
    let [r0, r1, r2] = rows(g);
    [cross(&r0, &r1), cross(&r1, &r2), cross(&r2, &r0)]
        .into_iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .map(normalize_max)
        .unwrap()
}

/// Two null vectors of a rank-1 Christoffel matrix: one in the sagittal
/// (`x1`–`x3`) plane and one carrying the transverse `x2` motion.
fn double_null_vectors(g: &Matrix3<C64>) -> [Vector3<C64>; 2] {
    let [r0, r1, r2] = rows(g);
    let r = [r0, r1, r2].into_iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
    let zero = C64::new(0.0, 0.0);
    if r.norm() == 0.0 {
        return [
            Vector3::new(C64::new(1.0, 0.0), zero, zero),
            Vector3::new(zero, C64::new(1.0, 0.0), zero),
        ];
    }
    let sagittal = Vector3::new(r[2], zero, -r[0]);
    let transverse_a = Vector3::new(zero, r[2], -r[1]);
    let transverse_b = Vector3::new(r[1], -r[0], zero);
    let first = if sagittal.norm() > 1e-12 * r.norm() {
        sagittal
    } else {
        // r lies along x2; the null space is the sagittal plane itself.
        Vector3::new(C64::new(1.0, 0.0), zero, zero)
    };
    let mut second = if transverse_a.norm() >= transverse_b.norm() { transverse_a } else { transverse_b };
    // Gram–Schmidt keeps `second` in the null space and independent of `first`.
    let proj = first.dotc(&second) / first.dotc(&first);
    second -= first * proj;
    if second.norm() < 1e-12 * first.norm() {
        second = Vector3::new(zero, C64::new(1.0, 0.0), zero);
    }
    [normalize_max(first), normalize_max(second)]
}

/// Stress components `σ_i3 / (iξ)` carried by a partial wave.
fn stress_vector(c: &RotatedStiffness, alpha: C64, u: &Vector3<C64>) -> Vector3<C64> {
    Vector3::from_fn(|i, _| {
        (0..3)
            .map(|k| (alpha * c.c[(voigt(i, 2), voigt(k, 2))] + c.c[(voigt(i, 2), voigt(k, 0))]) * u[k])
            .sum()
    })
}

/// Shear-horizontal motion decouples when the ply is isotropic in-plane or
/// aligned with the wave vector.
fn sh_decoupled(c: &RotatedStiffness) -> bool {
    let scale = c.c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    [c.at(1, 6), c.at(4, 5), c.at(3, 6)].iter().all(|v| v.abs() <= 1e-10 * scale)
}

/// `det Γ = Γ22 · (Γ11 Γ33 − Γ13²)`: roots of each factor come out exactly,
/// so the coincident shear roots of an isotropic ply never need merging.
fn decoupled_waves(c: &RotatedStiffness, rho: f64, cp: f64) -> Option<PartialWaves> {
    let rc2 = rho * cp * cp;
    let (c11, c13, c33, c44, c55, c66) = (c.at(1, 1), c.at(1, 3), c.at(3, 3), c.at(4, 4), c.at(5, 5), c.at(6, 6));
    let sh = C64::new((rc2 - c66) / c44, 0.0);
    let a = c55 * c33;
    let b = c55 * (c55 - rc2) + c33 * (c11 - rc2) - (c13 + c55).powi(2);
    let cc = (c11 - rc2) * (c55 - rc2);
    let root = C64::new(b * b - 4.0 * a * cc, 0.0).sqrt();
    let q = if b >= 0.0 { -(root + b) * 0.5 } else { (root - b) * 0.5 };
    if q.norm() == 0.0 {
        return None;
    }
    let sagittal = [q / a, C64::new(cc, 0.0) / q];
    let mut waves = [PartialWave { alpha: C64::new(0.0, 0.0), polarization: Vector3::zeros(), stress: Vector3::zeros() }; 6];
    let zero = C64::new(0.0, 0.0);
    for (q, &s2) in sagittal.iter().enumerate() {
        let a = plus_root(s2);
        for (slot, alpha) in [(2 * q, a), (2 * q + 1, -a)] {
            let g11 = alpha * alpha * c55 + (c11 - rc2);
            let g13 = alpha * (c13 + c55);
            let g33 = alpha * alpha * c33 + (c55 - rc2);
            let u = [Vector3::new(g13, zero, -g11), Vector3::new(g33, zero, -g13)]
                .into_iter()
                .max_by(|x, y| x.norm().total_cmp(&y.norm()))
                .unwrap();
            if u.norm() == 0.0 {
                return None;
            }
            let polarization = normalize_max(u);
            waves[slot] = PartialWave { alpha, polarization, stress: stress_vector(c, alpha, &polarization) };
        }
    }
    let a = plus_root(sh);
    let one = C64::new(1.0, 0.0);
    for (slot, alpha) in [(4, a), (5, -a)] {
        let polarization = Vector3::new(zero, one, zero);
        waves[slot] = PartialWave { alpha, polarization, stress: stress_vector(c, alpha, &polarization) };
    }
    let scale = sagittal.iter().chain([&sh]).map(|r| r.norm()).fold(0.0, f64::max);
    let degenerate = sagittal.iter().any(|r| (r - sh).norm() < DEGENERATE_ROOT_TOL * scale);
    Some(PartialWaves { waves, degenerate })
}

/// Solves the Christoffel cubic and pairs each root with its polarization.
pub fn partial_waves(c: &RotatedStiffness, rho: f64, cp: f64) -> PartialWaves {
    if sh_decoupled(c) {
        if let Some(w) = decoupled_waves(c, rho, cp) {
            return w;
        }
    }
    let poly = christoffel_polynomial(c, rho, cp);
    let mut s = cubic_roots(poly.cubic());
    let scale = s.iter().map(|r| r.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for r in s.iter_mut() {
        if r.im.abs() < 1e-12 * scale {
            r.im = 0.0;
        }
    }
    s.sort_by(|a, b| b.im.total_cmp(&a.im).then(a.re.total_cmp(&b.re)));

    let mut pair: Option<(usize, usize)> = None;
    'outer: for i in 0..3 {
        for j in (i + 1)..3 {
            if (s[i] - s[j]).norm() < DEGENERATE_ROOT_TOL * scale {
                pair = Some((i, j));
                break 'outer;
            }
        }
    }
    if let Some((i, j)) = pair {
        let mean = (s[i] + s[j]) * 0.5;
        let mean = if mean.im.abs() < 1e-12 * scale { C64::new(mean.re, 0.0) } else { mean };
        s[i] = mean;
        s[j] = mean;
    }

    let zero = PartialWave { alpha: C64::new(0.0, 0.0), polarization: Vector3::zeros(), stress: Vector3::zeros() };
    let mut waves = [zero; 6];
    for (q, &root) in s.iter().enumerate() {
        let a = plus_root(root);
        for (slot, alpha) in [(2 * q, a), (2 * q + 1, -a)] {
            let g = christoffel_matrix(c, rho, cp, alpha);
            let polarization = match pair {
                Some((i, j)) if q == i || q == j => double_null_vectors(&g)[usize::from(q == j)],
                _ => simple_null_vector(&g),
            };
            waves[slot] = PartialWave { alpha, polarization, stress: stress_vector(c, alpha, &polarization) };
        }
    }
    PartialWaves { waves, degenerate: pair.is_some() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerStiffness {
    pub k: Matrix6<C64>,
    /// m
    pub thickness: f64,
    /// Displacement matrix singular: `k` is meaningless here.
    pub pole: bool,
    /// 1-norm condition number of the displacement matrix.
    pub condition: f64,
}

impl LayerStiffness {
    pub fn ill_conditioned(&self) -> bool {
        self.condition > CONDITION_LIMIT
    }
}

fn norm1(m: &Matrix6<C64>) -> f64 {
    (0..6).map(|j| (0..6).map(|i| m[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Layer stiffness from its six partial waves.
///
/// `+α` waves are referenced to the bottom face and `−α` waves to the top
/// face, so every phase factor has modulus ≤ 1.
pub fn layer_stiffness(waves: &PartialWaves, state: &WaveState, thickness: f64) -> LayerStiffness {
    let xi = state.xi;
    let mut disp = Matrix6::<C64>::zeros();
    let mut stress = Matrix6::<C64>::zeros();
    let one = C64::new(1.0, 0.0);
    for q in 0..3 {
        let plus = &waves.waves[2 * q];
        let minus = &waves.waves[2 * q + 1];
        let phase = (I * xi * plus.alpha * thickness).exp();
        for (col, w, bottom, top) in [(2 * q, plus, one, phase), (2 * q + 1, minus, phase, one)] {
            for i in 0..3 {
                disp[(i, col)] = w.polarization[i] * bottom;
                disp[(i + 3, col)] = w.polarization[i] * top;
                stress[(i, col)] = I * xi * w.stress[i] * bottom;
                stress[(i + 3, col)] = I * xi * w.stress[i] * top;
            }
        }
    }
    match disp.try_inverse() {
        Some(inv) => {
            let condition = norm1(&disp) * norm1(&inv);
            let k = stress * inv;
            let pole = !condition.is_finite() || k.iter().any(|z| !z.re.is_finite() || !z.im.is_finite());
            LayerStiffness { k, thickness, pole, condition }
        }
        None => LayerStiffness { k: Matrix6::zeros(), thickness, pole: true, condition: f64::INFINITY },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalStiffness {
    pub k: Matrix6<C64>,
    pub pole: bool,
}

type Block = SMatrix<C64, 3, 3>;

fn blocks(k: &Matrix6<C64>) -> [Block; 4] {
    [
        k.fixed_view::<3, 3>(0, 0).into_owned(),
        k.fixed_view::<3, 3>(0, 3).into_owned(),
        k.fixed_view::<3, 3>(3, 0).into_owned(),
        k.fixed_view::<3, 3>(3, 3).into_owned(),
    ]
}

/// Combines two adjacent stacks, `lower` below `upper`.
pub fn combine(lower: &GlobalStiffness, upper: &GlobalStiffness) -> GlobalStiffness {
    let [a11, a12, a21, a22] = blocks(&lower.k);
    let [b11, b12, b21, b22] = blocks(&upper.k);
    let Some(m) = (b11 - a22).try_inverse() else {
        return GlobalStiffness { k: Matrix6::zeros(), pole: true };
    };
    let a12m = a12 * m;
    let b21m = b21 * m;
    let mut k = Matrix6::<C64>::zeros();
    k.fixed_view_mut::<3, 3>(0, 0).copy_from(&(a11 + a12m * a21));
    k.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-a12m * b12));
    k.fixed_view_mut::<3, 3>(3, 0).copy_from(&(b21m * a21));
    k.fixed_view_mut::<3, 3>(3, 3).copy_from(&(b22 - b21m * b12));
    let pole = lower.pole || upper.pole || k.iter().any(|z| !z.re.is_finite() || !z.im.is_finite());
    GlobalStiffness { k, pole }
}

/// Left fold of [`combine`] over the layers, bottom to top.
///
/// # Panics
/// If `layers` is empty.
pub fn assemble_global(layers: &[LayerStiffness]) -> GlobalStiffness {
    let first = layers.first().expect("at least one layer");
    let init = GlobalStiffness { k: first.k, pole: first.pole };
    layers[1..]
        .iter()
        .fold(init, |acc, l| combine(&acc, &GlobalStiffness { k: l.k, pole: l.pole }))
}

/// Real part of `det(K / scale)`.
///
/// `scale` must be positive; [`Laminate`](crate::dispersion::Laminate)
/// passes `ξ · max|C|`, which keeps magnitudes O(1) and never flips the sign.
pub fn characteristic(k: &GlobalStiffness, scale: f64) -> f64 {
    if k.pole {
        return f64::NAN;
    }
    (k.k / C64::new(scale, 0.0)).determinant().re
}

/// `|det(K / scale)|`, used to tell roots from poles.
pub fn characteristic_magnitude(k: &GlobalStiffness, scale: f64) -> f64 {
    if k.pole {
        return f64::INFINITY;
    }
    (k.k / C64::new(scale, 0.0)).determinant().modulus()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{rotate_stiffness, stiffness_from_engineering, Material};

    fn iso() -> (RotatedStiffness, f64) {
        let m = Material::isotropic(2700.0, 70e9, 0.33);
        let c = stiffness_from_engineering(&m).unwrap();
        (rotate_stiffness(&c, 0.0).unwrap(), m.rho)
    }

    fn as4(deg: f64) -> (RotatedStiffness, f64) {
        let m = Material::from_catalog("AS4M3502").unwrap();
        let c = stiffness_from_engineering(&m).unwrap();
        (rotate_stiffness(&c, deg.to_radians()).unwrap(), m.rho)
    }

    /// Γ from the full tensor, `Γ_ik = C_i1k1 + α(C_i1k3 + C_i3k1) + α² C_i3k3`.
    fn general_christoffel(c: &RotatedStiffness, rho: f64, cp: f64, alpha: C64) -> Matrix3<C64> {
        let t = crate::material::to_tensor(&c.c);
        Matrix3::from_fn(|i, k| {
            let mut g = alpha * alpha * t[i][2][k][2] + alpha * (t[i][0][k][2] + t[i][2][k][0]) + t[i][0][k][0];
            if i == k {
                g -= rho * cp * cp;
            }
            g
        })
    }

    #[test]
    fn displayed_matrix_matches_tensor_form() {
        for deg in [0.0, 30.0, 45.0, 71.0] {
            let (c, rho) = as4(deg);
            let a = C64::new(0.7, 0.3);
            let d = christoffel_matrix(&c, rho, 2000.0, a) - general_christoffel(&c, rho, 2000.0, a);
            assert!(d.norm() < 1e-9 * c.c.norm(), "{deg}: {}", d.norm());
        }
    }

    #[test]
    fn polynomial_is_even() {
        for deg in [0.0, 17.0, 45.0, 90.0, 133.0] {
            let (c, rho) = as4(deg);
            for cp in [300.0, 1500.0, 4000.0, 9000.0] {
                let p = christoffel_polynomial(&c, rho, cp);
                assert_eq!(p.coeffs[1], 0.0);
                assert_eq!(p.coeffs[3], 0.0);
                assert_eq!(p.coeffs[5], 0.0);
            }
        }
    }

    #[test]
    fn polynomial_equals_determinant() {
        let (c, rho) = as4(33.0);
        let p = christoffel_polynomial(&c, rho, 2500.0);
        for a in [C64::new(0.3, 0.0), C64::new(-1.2, 0.4), C64::new(0.0, 2.0)] {
            let det = christoffel_matrix(&c, rho, 2500.0, a).determinant();
            assert!((p.eval(a) - det).norm() < 1e-9 * det.norm().max(1e20));
        }
    }

    #[test]
    fn isotropic_roots_closed_form() {
        let (c, rho) = iso();
        let cl2 = c.at(1, 1) / rho;
        let ct2 = c.at(4, 4) / rho;
        let cp = 2000.0;
        let pw = partial_waves(&c, rho, cp);
        assert!(pw.degenerate);
        let mut s: Vec<f64> = (0..3).map(|q| (pw.waves[2 * q].alpha.powi(2)).re).collect();
        s.sort_by(f64::total_cmp);
        let sl = cp * cp / cl2 - 1.0;
        let st = cp * cp / ct2 - 1.0;
        assert!((s[0] - sl).abs() < 1e-9 * sl.abs());
        assert!((s[1] - st).abs() < 1e-7 * st.abs());
        assert!((s[2] - st).abs() < 1e-7 * st.abs());
    }

    #[test]
    fn bulk_longitudinal_grazing_root() {
        let (c, rho) = iso();
        let cp = (c.at(1, 1) / rho).sqrt();
        let p = christoffel_polynomial(&c, rho, cp);
        assert!(p.coeffs[0].abs() <= 1e-12 * p.coeffs.iter().map(|x| x.abs()).fold(0.0, f64::max));
    }

    #[test]
    fn null_vectors_and_pairs() {
        for deg in [0.0, 20.0, 45.0, 90.0] {
            let (c, rho) = as4(deg);
            for cp in [400.0, 1800.0, 2600.0, 7000.0, 11000.0] {
                let pw = partial_waves(&c, rho, cp);
                let sum: C64 = pw.waves.iter().map(|w| w.alpha).sum();
                let amax = pw.waves.iter().map(|w| w.alpha.norm()).fold(0.0, f64::max);
                assert!(sum.norm() <= 1e-10 * amax);
                for w in &pw.waves {
                    let g = christoffel_matrix(&c, rho, cp, w.alpha);
                    let res = (g * w.polarization).norm();
                    assert!(res <= 1e-8 * g.norm() * w.polarization.norm(), "{deg} {cp}: {res:e}");
                }
            }
        }
    }

    #[test]
    fn isotropic_polarizations() {
        let (c, rho) = iso();
        let cp = 1500.0;
        let pw = partial_waves(&c, rho, cp);
        let sl = cp * cp / (c.at(1, 1) / rho) - 1.0;
        for w in &pw.waves {
            let u = w.polarization;
            let g = christoffel_matrix(&c, rho, cp, w.alpha);
            assert!((g * u).norm() <= 1e-8 * g.norm() * u.norm());
            if ((w.alpha * w.alpha).re - sl).abs() < 1e-9 {
                // Longitudinal: parallel to the slowness direction (1, 0, α).
                let cr = cross(&u, &Vector3::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), w.alpha));
                assert!(cr.norm() < 1e-9 * u.norm());
            } else {
                // Transverse: (1, 0, α)·u = 0.
                let d = u[0] + w.alpha * u[2];
                assert!(d.norm() < 1e-9 * u.norm());
            }
        }
        // One of each shear pair is SH.
        assert!(pw.waves.iter().filter(|w| w.polarization[1].norm() > 0.99).count() == 2);
    }

    fn single_layer(c: &RotatedStiffness, rho: f64, state: &WaveState, h: f64) -> LayerStiffness {
        layer_stiffness(&partial_waves(c, rho, state.cp), state, h)
    }

    fn rel_diff(a: &Matrix6<C64>, b: &Matrix6<C64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn doubling_a_layer() {
        for (c, rho) in [iso(), as4(0.0), as4(30.0)] {
            for cp in [700.0, 2500.0, 6000.0] {
                let st = WaveState::new(100e3, cp, 0.0);
                let one = single_layer(&c, rho, &st, 1e-3);
                let two = single_layer(&c, rho, &st, 2e-3);
                let g = assemble_global(&[one, one]);
                assert!(rel_diff(&g.k, &two.k) < 1e-6, "cp {cp}: {}", rel_diff(&g.k, &two.k));
            }
        }
    }

    #[test]
    fn sixteen_plies_equal_one_plate() {
        let (c, rho) = as4(0.0);
        let st = WaveState::new(150e3, 1200.0, 0.0);
        let ply = single_layer(&c, rho, &st, 0.125e-3);
        let plate = single_layer(&c, rho, &st, 2e-3);
        let g = assemble_global(&[ply; 16]);
        assert!(rel_diff(&g.k, &plate.k) < 1e-6);
    }

    #[test]
    fn fold_base_case_and_associativity() {
        let st = WaveState::new(80e3, 1700.0, 0.0);
        let layers: Vec<LayerStiffness> = [0.0, 45.0, 90.0]
            .iter()
            .map(|&d| {
                let (c, rho) = as4(d);
                single_layer(&c, rho, &st, 0.4e-3)
            })
            .collect();
        assert_eq!(assemble_global(&layers[..1]).k, layers[0].k);
        let abc = assemble_global(&layers);
        let ab = assemble_global(&layers[..2]);
        let ab_c = combine(&ab, &GlobalStiffness { k: layers[2].k, pole: false });
        assert!(rel_diff(&ab_c.k, &abc.k) < 1e-8);
    }

    #[test]
    fn reciprocity() {
        // diag(−I, I)·K maps displacements to outward face tractions; for a
        // lossless layer it is Hermitian, and real symmetric once u3 and σ33
        // are rotated by i.
        let flip = Matrix6::<C64>::from_diagonal(&nalgebra::Vector6::from_fn(|i, _| {
            C64::new(if i < 3 { -1.0 } else { 1.0 }, 0.0)
        }));
        for (c, rho) in [iso(), as4(0.0), as4(30.0), as4(60.0)] {
            for cp in [500.0, 1500.0, 3000.0, 8000.0] {
                let st = WaveState::new(120e3, cp, 0.0);
                let l = single_layer(&c, rho, &st, 0.5e-3);
                let t = flip * l.k;
                let asym = (t - t.adjoint()).norm() / t.norm();
                assert!(asym < 1e-8, "cp {cp}: {asym:e}");
                let g = assemble_global(&[l, single_layer(&as4(45.0).0, rho, &st, 0.3e-3)]);
                let t = flip * g.k;
                assert!((t - t.adjoint()).norm() / t.norm() < 1e-8);
                let s = Matrix6::<C64>::from_diagonal(&nalgebra::Vector6::from_fn(|i, _| {
                    if i % 3 == 2 { I } else { C64::new(1.0, 0.0) }
                }));
                let r = s.adjoint() * t * s;
                assert!(r.iter().all(|z| z.im.abs() <= 1e-8 * t.norm()));
                assert!((r - r.transpose()).norm() / r.norm() < 1e-8);
            }
        }
    }

    #[test]
    fn determinant_is_real_for_lossless_plate() {
        let (c, rho) = as4(37.0);
        for cp in [600.0, 1900.0, 4000.0] {
            let st = WaveState::new(100e3, cp, 0.0);
            let l = single_layer(&c, rho, &st, 2e-3);
            let d = (l.k / C64::new(st.xi * c.c.max(), 0.0)).determinant();
            assert!(d.im.abs() <= 1e-8 * d.norm(), "{cp}: {d}");
        }
    }
}
