//! Forward passes of the dual-channel VAE from a WGT1 weight file, plus the
//! latent samplers that feed the decoder.
//!
//! WGT1 layout, all integers little-endian:
//!
//! ```text
//! "WGT1" | version: u32 | header length: u32 | header JSON | f32 payloads
//! ```
//!
//! Payloads follow the encoder then decoder layer lists, weight before bias.
//! Dense weights are `[out, in]`, conv weights `[out, in, k, k]` and
//! transposed-conv weights `[in, out, k, k]`. Convolutions are
//! cross-correlations with symmetric zero padding.

use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::ModeLabel;
use crate::polar::{symmetry_score, BinaryImage, PolarError};

pub const MAGIC: &[u8; 4] = b"WGT1";
pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_BOUNDS: [f64; 2] = [-2.0, 2.0];
pub const THRESHOLD: f64 = 0.5;
pub const GENERATION_MANIFEST: &str = "generated.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum InferError {
    #[error("not a WGT1 file: {0}")]
    Format(String),
    #[error("unsupported WGT1 version {0}")]
    Version(u32),
    #[error("bad WGT1 header: {0}")]
    Header(String),
    #[error("layers `{first}` -> `{second}` do not compose: {msg}")]
    Composition { first: String, second: String, msg: String },
    #[error("payload length mismatch at `{layer}`: expected {expected} floats, found {found}")]
    Length { layer: String, expected: usize, found: usize },
    #[error("non-finite activation after layer `{0}`")]
    NonFinite(String),
    #[error("expected input of shape {expected:?}, got {found:?}")]
    InputShape { expected: Vec<usize>, found: Vec<usize> },
    #[error("decoder output {value} outside [0, 1]")]
    OutOfRange { value: f64 },
    #[error("latent axis {axis} outside 1..={dim}")]
    Axis { axis: usize, dim: usize },
    #[error("invalid sampler arguments: {0}")]
    Sampler(String),
    #[error("latent CSV line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("{0} already exists; pass overwrite to replace it")]
    Exists(PathBuf),
    #[error(transparent)]
    Polar(#[from] PolarError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
}

fn one() -> usize {
    1
}

/// One entry of a coder's layer list, as stored in the WGT1 header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        #[serde(default)]
        name: String,
        in_features: usize,
        out_features: usize,
    },
    Conv {
        #[serde(default)]
        name: String,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
    },
    ConvTranspose {
        #[serde(default)]
        name: String,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
        #[serde(default)]
        output_padding: usize,
    },
    Activation {
        #[serde(default)]
        name: String,
        function: Activation,
    },
    Reshape {
        #[serde(default)]
        name: String,
        shape: Vec<usize>,
    },
}

impl LayerSpec {
    pub fn name(&self) -> &str {
        match self {
            LayerSpec::Dense { name, .. }
            | LayerSpec::Conv { name, .. }
            | LayerSpec::ConvTranspose { name, .. }
            | LayerSpec::Activation { name, .. }
            | LayerSpec::Reshape { name, .. } => name,
        }
    }

    fn name_mut(&mut self) -> &mut String {
        match self {
            LayerSpec::Dense { name, .. }
            | LayerSpec::Conv { name, .. }
            | LayerSpec::ConvTranspose { name, .. }
            | LayerSpec::Activation { name, .. }
            | LayerSpec::Reshape { name, .. } => name,
        }
    }

    /// Element counts of (weight, bias).
    pub fn param_counts(&self) -> (usize, usize) {
        match *self {
            LayerSpec::Dense { in_features, out_features, .. } => (in_features * out_features, out_features),
            LayerSpec::Conv { in_channels, out_channels, kernel, .. }
            | LayerSpec::ConvTranspose { in_channels, out_channels, kernel, .. } => {
                (in_channels * out_channels * kernel * kernel, out_channels)
            }
            LayerSpec::Activation { .. } | LayerSpec::Reshape { .. } => (0, 0),
        }
    }

    /// Output shape for a given input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, String> {
        match *self {
            LayerSpec::Dense { in_features, out_features, .. } => match input {
                [n] if *n == in_features => Ok(vec![out_features]),
                _ => Err(format!("dense expects [{in_features}], got {input:?}")),
            },
            LayerSpec::Conv { in_channels, out_channels, kernel, stride, padding, .. } => {
                let [c, h, w] = *input else {
                    return Err(format!("conv expects [C, H, W], got {input:?}"));
                };
                if c != in_channels {
                    return Err(format!("conv expects {in_channels} channels, got {c}"));
                }
                if kernel == 0 || stride == 0 {
                    return Err("kernel and stride must be positive".into());
                }
                let out = |n: usize| {
                    (n + 2 * padding).checked_sub(kernel).map(|d| d / stride + 1).ok_or(format!(
                        "kernel {kernel} larger than padded input {}",
                        n + 2 * padding
                    ))
                };
                Ok(vec![out_channels, out(h)?, out(w)?])
            }
            LayerSpec::ConvTranspose { in_channels, out_channels, kernel, stride, padding, output_padding, .. } => {
                let [c, h, w] = *input else {
                    return Err(format!("conv_transpose expects [C, H, W], got {input:?}"));
                };
                if c != in_channels {
                    return Err(format!("conv_transpose expects {in_channels} channels, got {c}"));
                }
                if kernel == 0 || stride == 0 {
                    return Err("kernel and stride must be positive".into());
                }
                if padding >= kernel {
                    return Err(format!("padding {padding} must be below kernel {kernel}"));
                }
                if output_padding >= stride {
                    return Err(format!("output_padding {output_padding} must be below stride {stride}"));
                }
                let out = |n: usize| {
                    ((n - 1) * stride + kernel + output_padding)
                        .checked_sub(2 * padding)
                        .filter(|&v| v > 0)
                        .ok_or(format!("empty output for input size {n}"))
                };
                Ok(vec![out_channels, out(h)?, out(w)?])
            }
            LayerSpec::Activation { .. } => Ok(input.to_vec()),
            LayerSpec::Reshape { ref shape, .. } => {
                let n: usize = input.iter().product();
                if shape.iter().product::<usize>() != n || shape.is_empty() {
                    return Err(format!("cannot reshape {input:?} into {shape:?}"));
                }
                Ok(shape.clone())
            }
        }
    }
}

/// A layer with its stored tensors and the f64 kernels used for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
    kernel: Vec<f64>,
}

impl Layer {
    pub fn new(spec: LayerSpec, weight: Vec<f32>, bias: Vec<f32>) -> Result<Layer, InferError> {
        let (nw, nb) = spec.param_counts();
        for (expected, found) in [(nw, weight.len()), (nb, bias.len())] {
            if expected != found {
                return Err(InferError::Length { layer: spec.name().to_string(), expected, found });
            }
        }
        let kernel = match spec {
            // Transposed conv runs as a stride-1 conv over the zero-dilated
            // input with the kernel flipped and its channel axes swapped.
            LayerSpec::ConvTranspose { in_channels, out_channels, kernel: k, .. } => {
                let mut out = vec![0.0; weight.len()];
                for c in 0..in_channels {
                    for o in 0..out_channels {
                        for i in 0..k {
                            for j in 0..k {
                                out[((o * in_channels + c) * k + i) * k + j] =
                                    weight[((c * out_channels + o) * k + (k - 1 - i)) * k + (k - 1 - j)] as f64;
                            }
                        }
                    }
                }
                out
            }
            _ => weight.iter().map(|&v| v as f64).collect(),
        };
        Ok(Layer { spec, weight, bias, kernel })
    }

    fn bias64(&self, o: usize) -> f64 {
        self.bias[o] as f64
    }
}

/// Dense activation tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "tensor shape and data disagree");
        Tensor { shape, data }
    }
}

/// Stride-1 cross-correlation of a `[c, h, w]` input (already padded) via
/// an im2col matrix product.
fn correlate(input: &[f64], c: usize, h: usize, w: usize, kernel: &[f64], bias: impl Fn(usize) -> f64, out_c: usize, k: usize, stride: usize) -> (Vec<f64>, usize, usize) {
    let oh = (h - k) / stride + 1;
    let ow = (w - k) / stride + 1;
    let patch = c * k * k;
    let mut cols = DMatrix::<f64>::zeros(patch, oh * ow);
    for y in 0..oh {
        for x in 0..ow {
            let col = y * ow + x;
            let mut q = 0;
            for ch in 0..c {
                for i in 0..k {
                    let row = &input[(ch * h + y * stride + i) * w + x * stride..];
                    for j in 0..k {
                        cols[(q, col)] = row[j];
                        q += 1;
                    }
                }
            }
        }
    }
    let wm = DMatrix::from_row_slice(out_c, patch, kernel);
    let prod = wm * cols;
    let mut out = vec![0.0; out_c * oh * ow];
    for o in 0..out_c {
        let b = bias(o);
        for p in 0..oh * ow {
            out[o * oh * ow + p] = prod[(o, p)] + b;
        }
    }
    (out, oh, ow)
}

/// Places `input` into a zero canvas: samples spaced `stride` apart, offset
/// by `before`, with `after` extra zeros on the bottom and right.
fn embed(input: &[f64], c: usize, h: usize, w: usize, stride: usize, before: usize, after: usize) -> (Vec<f64>, usize, usize) {
    let nh = (h - 1) * stride + 1 + before + after;
    let nw = (w - 1) * stride + 1 + before + after;
    let mut out = vec![0.0; c * nh * nw];
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                out[(ch * nh + before + y * stride) * nw + before + x * stride] = input[(ch * h + y) * w + x];
            }
        }
    }
    (out, nh, nw)
}

fn apply(layer: &Layer, x: &Tensor) -> Tensor {
    match layer.spec {
        LayerSpec::Dense { in_features, out_features, .. } => {
            let data = (0..out_features)
                .map(|o| {
                    let row = &layer.kernel[o * in_features..(o + 1) * in_features];
                    layer.bias64(o) + row.iter().zip(&x.data).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            Tensor::new(vec![out_features], data)
        }
        LayerSpec::Conv { in_channels, out_channels, kernel, stride, padding, .. } => {
            let [_, h, w] = x.shape[..] else { unreachable!("validated shape") };
            let (padded, ph, pw) = embed(&x.data, in_channels, h, w, 1, padding, padding);
            let (data, oh, ow) =
                correlate(&padded, in_channels, ph, pw, &layer.kernel, |o| layer.bias64(o), out_channels, kernel, stride);
            Tensor::new(vec![out_channels, oh, ow], data)
        }
        LayerSpec::ConvTranspose { in_channels, out_channels, kernel, stride, padding, output_padding, .. } => {
            let [_, h, w] = x.shape[..] else { unreachable!("validated shape") };
            let edge = kernel - 1 - padding;
            let (dilated, dh, dw) = embed(&x.data, in_channels, h, w, stride, edge, edge + output_padding);
            let (data, oh, ow) =
                correlate(&dilated, in_channels, dh, dw, &layer.kernel, |o| layer.bias64(o), out_channels, kernel, 1);
            Tensor::new(vec![out_channels, oh, ow], data)
        }
        LayerSpec::Activation { function, .. } => {
            let f: fn(f64) -> f64 = match function {
                Activation::Relu => |v| v.max(0.0),
                Activation::Sigmoid => |v| 1.0 / (1.0 + (-v).exp()),
            };
            Tensor::new(x.shape.clone(), x.data.iter().map(|&v| f(v)).collect())
        }
        LayerSpec::Reshape { ref shape, .. } => Tensor::new(shape.clone(), x.data.clone()),
    }
}

/// Checks that `layers` map `input` to some shape and returns it, naming
/// the offending layer pair on failure.
pub fn infer_shapes(layers: &[LayerSpec], input: &[usize]) -> Result<Vec<usize>, InferError> {
    let mut shape = input.to_vec();
    let mut prev = "input".to_string();
    for l in layers {
        shape = l.output_shape(&shape).map_err(|msg| InferError::Composition {
            first: prev.clone(),
            second: l.name().to_string(),
            msg,
        })?;
        prev = l.name().to_string();
    }
    Ok(shape)
}

/// Runs a layer list. Shapes are checked up front; activations are checked
/// for finiteness after every layer.
pub fn forward(layers: &[Layer], input: &Tensor) -> Result<Tensor, InferError> {
    let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec.clone()).collect();
    infer_shapes(&specs, &input.shape)?;
    let mut x = input.clone();
    for l in layers {
        x = apply(l, &x);
        if x.data.iter().any(|v| !v.is_finite()) {
            return Err(InferError::NonFinite(l.spec.name().to_string()));
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    latent_dim: usize,
    input_channels: usize,
    input_size: usize,
    encoder: Vec<LayerSpec>,
    decoder: Vec<LayerSpec>,
}

/// Encoder and decoder of one trained model. Immutable once loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    pub latent_dim: usize,
    pub input_channels: usize,
    pub input_size: usize,
    pub encoder: Vec<Layer>,
    pub decoder: Vec<Layer>,
}

fn name_layers(specs: &mut [LayerSpec], prefix: &str) {
    for (i, s) in specs.iter_mut().enumerate() {
        if s.name().is_empty() {
            *s.name_mut() = format!("{prefix}.{i}");
        }
    }
}

impl NetworkWeights {
    pub fn image_shape(&self) -> Vec<usize> {
        vec![self.input_channels, self.input_size, self.input_size]
    }

    /// Shape composition: image → `2L` through the encoder, `L` → image
    /// through the decoder.
    pub fn validate(&self) -> Result<(), InferError> {
        let enc: Vec<LayerSpec> = self.encoder.iter().map(|l| l.spec.clone()).collect();
        let dec: Vec<LayerSpec> = self.decoder.iter().map(|l| l.spec.clone()).collect();
        if !enc.is_empty() {
            let out = infer_shapes(&enc, &self.image_shape())?;
            if out != [2 * self.latent_dim] {
                return Err(InferError::Composition {
                    first: enc.last().unwrap().name().to_string(),
                    second: "latent".into(),
                    msg: format!("encoder yields {out:?}, expected [{}]", 2 * self.latent_dim),
                });
            }
        }
        let out = infer_shapes(&dec, &[self.latent_dim])?;
        if out != self.image_shape() {
            return Err(InferError::Composition {
                first: dec.last().map_or("latent", |l| l.name()).to_string(),
                second: "output".into(),
                msg: format!("decoder yields {out:?}, expected {:?}", self.image_shape()),
            });
        }
        Ok(())
    }

    /// Builds weights from layer specs with uniform random tensors in
    /// `[-amplitude, amplitude]`.
    pub fn seeded(
        latent_dim: usize,
        input_channels: usize,
        input_size: usize,
        mut encoder: Vec<LayerSpec>,
        mut decoder: Vec<LayerSpec>,
        seed: u64,
        amplitude: f32,
    ) -> Result<NetworkWeights, InferError> {
        name_layers(&mut encoder, "encoder");
        name_layers(&mut decoder, "decoder");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut build = |specs: Vec<LayerSpec>| -> Result<Vec<Layer>, InferError> {
            specs
                .into_iter()
                .map(|s| {
                    let (nw, nb) = s.param_counts();
                    let mut draw = |n| (0..n).map(|_| rng.random_range(-amplitude..=amplitude)).collect();
                    let w = draw(nw);
                    let b = draw(nb);
                    Layer::new(s, w, b)
                })
                .collect()
        };
        let encoder = build(encoder)?;
        let decoder = build(decoder)?;
        let w = NetworkWeights { latent_dim, input_channels, input_size, encoder, decoder };
        w.validate()?;
        Ok(w)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            latent_dim: self.latent_dim,
            input_channels: self.input_channels,
            input_size: self.input_size,
            encoder: self.encoder.iter().map(|l| l.spec.clone()).collect(),
            decoder: self.decoder.iter().map(|l| l.spec.clone()).collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for l in self.encoder.iter().chain(&self.decoder) {
            for v in l.weight.iter().chain(&l.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<NetworkWeights, InferError> {
        if bytes.len() < 12 {
            return Err(InferError::Format("file shorter than the fixed preamble".into()));
        }
        if &bytes[..4] != MAGIC {
            return Err(InferError::Format(format!("bad magic {:?}", String::from_utf8_lossy(&bytes[..4]))));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(InferError::Version(version));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let json = bytes.get(12..12 + hlen).ok_or(InferError::Format("header runs past end of file".into()))?;
        let mut header: Header = serde_json::from_slice(json).map_err(|e| InferError::Header(e.to_string()))?;
        name_layers(&mut header.encoder, "encoder");
        name_layers(&mut header.decoder, "decoder");

        let payload = &bytes[12 + hlen..];
        if payload.len() % 4 != 0 {
            return Err(InferError::Length {
                layer: "payload".into(),
                expected: payload.len() / 4 * 4,
                found: payload.len(),
            });
        }
        let floats: Vec<f32> = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        let mut pos = 0;
        let mut take = |specs: Vec<LayerSpec>| -> Result<Vec<Layer>, InferError> {
            specs
                .into_iter()
                .map(|s| {
                    let (nw, nb) = s.param_counts();
                    let available = floats.len() - pos;
                    if available < nw + nb {
                        return Err(InferError::Length {
                            layer: s.name().to_string(),
                            expected: nw + nb,
                            found: available,
                        });
                    }
                    let w = floats[pos..pos + nw].to_vec();
                    let b = floats[pos + nw..pos + nw + nb].to_vec();
                    pos += nw + nb;
                    Layer::new(s, w, b)
                })
                .collect()
        };
        let encoder = take(header.encoder)?;
        let decoder = take(header.decoder)?;
        if pos != floats.len() {
            return Err(InferError::Length { layer: "end of file".into(), expected: pos, found: floats.len() });
        }
        let w = NetworkWeights {
            latent_dim: header.latent_dim,
            input_channels: header.input_channels,
            input_size: header.input_size,
            encoder,
            decoder,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), InferError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<NetworkWeights, InferError> {
    NetworkWeights::from_bytes(&fs::read(path)?)
}

/// Symmetric five-stage conv/transposed-conv layout with the given channel
/// widths; each stage halves (encoder) or doubles (decoder) the image side.
pub fn default_architecture(latent_dim: usize, input_size: usize, widths: &[usize]) -> (Vec<LayerSpec>, Vec<LayerSpec>) {
    let relu = || LayerSpec::Activation { name: String::new(), function: Activation::Relu };
    let stages = widths.len();
    let side = input_size >> stages;
    let last = *widths.last().expect("at least one stage");
    let flat = last * side * side;

    let mut enc = Vec::new();
    let mut c = 2;
    for &w in widths {
        enc.push(LayerSpec::Conv { name: String::new(), in_channels: c, out_channels: w, kernel: 3, stride: 2, padding: 1 });
        enc.push(relu());
        c = w;
    }
    enc.push(LayerSpec::Reshape { name: String::new(), shape: vec![flat] });
    enc.push(LayerSpec::Dense { name: String::new(), in_features: flat, out_features: 2 * latent_dim });

    let mut dec = vec![
        LayerSpec::Dense { name: String::new(), in_features: latent_dim, out_features: flat },
        relu(),
        LayerSpec::Reshape { name: String::new(), shape: vec![last, side, side] },
    ];
    let mut c = last;
    for (i, &w) in widths.iter().rev().skip(1).chain(std::iter::once(&2)).enumerate() {
        dec.push(LayerSpec::ConvTranspose {
            name: String::new(),
            in_channels: c,
            out_channels: w,
            kernel: 3,
            stride: 2,
            padding: 1,
            output_padding: 1,
        });
        if i + 1 < stages {
            dec.push(relu());
        }
        c = w;
    }
    dec.push(LayerSpec::Activation { name: String::new(), function: Activation::Sigmoid });
    (enc, dec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPoint {
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosterior {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Two `size × size` channels in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePair {
    pub size: usize,
    pub a0: Vec<f64>,
    pub s0: Vec<f64>,
}

impl ImagePair {
    pub fn from_rasters(a0: &BinaryImage, s0: &BinaryImage) -> Result<ImagePair, InferError> {
        if a0.width != a0.height || (s0.width, s0.height) != (a0.width, a0.height) {
            return Err(InferError::InputShape {
                expected: vec![2, a0.width, a0.width],
                found: vec![2, s0.height, s0.width],
            });
        }
        let f = |img: &BinaryImage| img.pixels.iter().map(|&p| p as f64).collect();
        Ok(ImagePair { size: a0.width, a0: f(a0), s0: f(s0) })
    }

    pub fn channel(&self, mode: ModeLabel) -> &[f64] {
        match mode {
            ModeLabel::A0 => &self.a0,
            _ => &self.s0,
        }
    }

    /// Binary image of one channel: pixel set iff value ≥ `threshold`.
    pub fn binarize(&self, mode: ModeLabel, threshold: f64) -> BinaryImage {
        let pixels = self.channel(mode).iter().map(|&v| (v >= threshold) as u8).collect();
        BinaryImage { width: self.size, height: self.size, pixels }
    }

    fn to_tensor(&self) -> Tensor {
        let mut data = self.a0.clone();
        data.extend_from_slice(&self.s0);
        Tensor::new(vec![2, self.size, self.size], data)
    }
}

pub fn decode(z: &LatentPoint, w: &NetworkWeights) -> Result<ImagePair, InferError> {
    if z.z.len() != w.latent_dim {
        return Err(InferError::InputShape { expected: vec![w.latent_dim], found: vec![z.z.len()] });
    }
    if w.input_channels != 2 {
        return Err(InferError::InputShape { expected: vec![2], found: vec![w.input_channels] });
    }
    let out = forward(&w.decoder, &Tensor::new(vec![w.latent_dim], z.z.clone()))?;
    if let Some(&v) = out.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(InferError::OutOfRange { value: v });
    }
    let n = w.input_size * w.input_size;
    Ok(ImagePair { size: w.input_size, a0: out.data[..n].to_vec(), s0: out.data[n..].to_vec() })
}

pub fn encode(img: &ImagePair, w: &NetworkWeights) -> Result<GaussianPosterior, InferError> {
    let x = img.to_tensor();
    if x.shape != w.image_shape() {
        return Err(InferError::InputShape { expected: w.image_shape(), found: x.shape });
    }
    let out = forward(&w.encoder, &x)?;
    let l = w.latent_dim;
    let mu = out.data[..l].to_vec();
    let sigma: Vec<f64> = out.data[l..2 * l].iter().map(|lv| (0.5 * lv).exp()).collect();
    if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        let last = w.encoder.last().map_or("encoder", |l| l.spec.name());
        return Err(InferError::NonFinite(last.to_string()));
    }
    Ok(GaussianPosterior { mu, sigma })
}

fn check_bounds(bounds: [f64; 2]) -> Result<(), InferError> {
    if !(bounds[0].is_finite() && bounds[1].is_finite() && bounds[0] < bounds[1]) {
        return Err(InferError::Sampler(format!("bounds {bounds:?} need finite lower < upper")));
    }
    Ok(())
}

/// `n` i.i.d. uniform points in `[lo, hi]^dim`.
pub fn sample_monte_carlo(n: usize, dim: usize, bounds: [f64; 2], seed: u64) -> Result<Vec<LatentPoint>, InferError> {
    check_bounds(bounds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| LatentPoint { z: (0..dim).map(|_| rng.random_range(bounds[0]..=bounds[1])).collect() }).collect())
}

/// Evenly spaced points from `lo` to `hi` along one 1-based axis, all other
/// coordinates zero. A single step gives the midpoint.
pub fn sample_directional(axis: usize, steps: usize, dim: usize, bounds: [f64; 2]) -> Result<Vec<LatentPoint>, InferError> {
    check_bounds(bounds)?;
    if axis == 0 || axis > dim {
        return Err(InferError::Axis { axis, dim });
    }
    if steps == 0 {
        return Err(InferError::Sampler("steps must be at least 1".into()));
    }
    let [lo, hi] = bounds;
    Ok((0..steps)
        .map(|i| {
            let v = if steps == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * i as f64 / (steps - 1) as f64 };
            let mut z = vec![0.0; dim];
            z[axis - 1] = v;
            LatentPoint { z }
        })
        .collect())
}

pub fn latent_csv(points: &[LatentPoint], dim: usize) -> String {
    let mut s = (1..=dim).map(|i| format!("z{i}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for p in points {
        s.push_str(&p.z.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

pub fn write_latent_csv(path: impl AsRef<Path>, points: &[LatentPoint], dim: usize) -> Result<(), InferError> {
    fs::write(path, latent_csv(points, dim))?;
    Ok(())
}

/// Parses a `z1..zL` CSV. Extra leading columns (such as an id) are not
/// allowed; the header fixes the dimension.
pub fn read_latent_csv(reader: impl BufRead) -> Result<Vec<LatentPoint>, InferError> {
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.ok_or(InferError::Csv { line: 1, msg: "missing header".into() })?;
    let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    for (i, c) in cols.iter().enumerate() {
        if *c != format!("z{}", i + 1) {
            return Err(InferError::Csv { line: 1, msg: format!("expected column z{}, found `{c}`", i + 1) });
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let n = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let z: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| InferError::Csv { line: n, msg: e.to_string() }))
            .collect::<Result<_, _>>()?;
        if z.len() != cols.len() || z.iter().any(|v| !v.is_finite()) {
            return Err(InferError::Csv { line: n, msg: format!("expected {} finite values", cols.len()) });
        }
        out.push(LatentPoint { z });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationScores {
    #[serde(rename = "A0")]
    pub a0: f64,
    #[serde(rename = "S0")]
    pub s0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub index: usize,
    pub z: Vec<f64>,
    pub a0: Option<String>,
    pub s0: Option<String>,
    pub symmetry_score: Option<GenerationScores>,
    #[serde(default)]
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerateOptions {
    pub threshold: f64,
    pub overwrite: bool,
    pub jobs: Option<usize>,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions { threshold: THRESHOLD, overwrite: false, jobs: None }
    }
}

fn generate_one(p: &LatentPoint, index: usize, w: &NetworkWeights, out_dir: &Path, threshold: f64) -> Result<GenerationRecord, InferError> {
    let pair = match decode(p, w) {
        Ok(pair) => pair,
        Err(e @ (InferError::NonFinite(_) | InferError::OutOfRange { .. })) => {
            return Ok(GenerationRecord {
                index,
                z: p.z.clone(),
                a0: None,
                s0: None,
                symmetry_score: None,
                failed: true,
                error: Some(e.to_string()),
            });
        }
        Err(e) => return Err(e),
    };
    let mut paths = Vec::new();
    let mut scores = Vec::new();
    for mode in [ModeLabel::A0, ModeLabel::S0] {
        let img = pair.binarize(mode, threshold);
        let rel = format!("gen_{index:05}_{mode}.pgm");
        img.write_pgm(out_dir.join(&rel))?;
        paths.push(rel);
        scores.push(symmetry_score(&img).score);
    }
    Ok(GenerationRecord {
        index,
        z: p.z.clone(),
        a0: Some(paths[0].clone()),
        s0: Some(paths[1].clone()),
        symmetry_score: Some(GenerationScores { a0: scores[0], s0: scores[1] }),
        failed: false,
        error: None,
    })
}

/// Decodes every point, writes `gen_<index>_<mode>.pgm` rasters and a JSON
/// Lines manifest in point order.
pub fn generate(
    points: &[LatentPoint],
    w: &NetworkWeights,
    out_dir: &Path,
    opts: &GenerateOptions,
) -> Result<Vec<GenerationRecord>, InferError> {
    if let Some(p) = points.iter().find(|p| p.z.len() != w.latent_dim) {
        return Err(InferError::InputShape { expected: vec![w.latent_dim], found: vec![p.z.len()] });
    }
    fs::create_dir_all(out_dir)?;
    let manifest = out_dir.join(GENERATION_MANIFEST);
    if manifest.exists() && !opts.overwrite {
        return Err(InferError::Exists(manifest));
    }
    let mut file = OpenOptions::new().create(true).write(true).truncate(true).open(&manifest)?;
    let run = || {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| generate_one(p, i, w, out_dir, opts.threshold))
            .collect::<Result<Vec<_>, _>>()
    };
    let records = match opts.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| InferError::Sampler(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    let mut buf = String::new();
    for r in &records {
        buf.push_str(&serde_json::to_string(r).expect("records serialize"));
        buf.push('\n');
    }
    file.write_all(buf.as_bytes())?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_conv() {
        let spec = LayerSpec::Conv { name: "id".into(), in_channels: 1, out_channels: 1, kernel: 1, stride: 1, padding: 0 };
        let l = Layer::new(spec, vec![1.0], vec![0.0]).unwrap();
        let x = Tensor::new(vec![1, 3, 3], (0..9).map(|v| v as f64).collect());
        assert_eq!(forward(&[l], &x).unwrap(), x);
    }

    #[test]
    fn default_architecture_composes() {
        let (enc, dec) = default_architecture(5, 64, &[16, 32, 64, 128, 256]);
        let e = infer_shapes(&enc, &[2, 64, 64]).unwrap();
        assert_eq!(e, vec![10]);
        assert_eq!(infer_shapes(&dec, &[5]).unwrap(), vec![2, 64, 64]);
        let convs = dec.iter().filter(|l| matches!(l, LayerSpec::ConvTranspose { .. })).count();
        assert_eq!(convs, 5);
    }

    #[test]
    fn directional_progressions() {
        let pts = sample_directional(1, 5, 5, DEFAULT_BOUNDS).unwrap();
        assert_eq!(pts.iter().map(|p| p.z[0]).collect::<Vec<_>>(), [-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert!(pts.iter().all(|p| p.z[1..].iter().all(|&v| v == 0.0)));
        let pts = sample_directional(5, 3, 5, DEFAULT_BOUNDS).unwrap();
        assert_eq!(pts.iter().map(|p| p.z[4]).collect::<Vec<_>>(), [-2.0, 0.0, 2.0]);
        assert_eq!(sample_directional(2, 1, 5, DEFAULT_BOUNDS).unwrap()[0].z, vec![0.0; 5]);
        assert!(matches!(sample_directional(6, 3, 5, DEFAULT_BOUNDS), Err(InferError::Axis { .. })));
        assert!(matches!(sample_directional(0, 3, 5, DEFAULT_BOUNDS), Err(InferError::Axis { .. })));
    }

    #[test]
    fn latent_csv_round_trip() {
        let pts = sample_monte_carlo(7, 5, DEFAULT_BOUNDS, 3).unwrap();
        let text = latent_csv(&pts, 5);
        assert!(text.starts_with("z1,z2,z3,z4,z5\n"));
        assert_eq!(read_latent_csv(text.as_bytes()).unwrap(), pts);
        assert!(matches!(read_latent_csv("z1,z2\n1,2\n3\n".as_bytes()), Err(InferError::Csv { line: 3, .. })));
    }
}
