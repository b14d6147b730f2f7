//! Deterministic forward-pass engine: convolution, max-pooling, local
//! contrast normalization, rectification, plus weight init and a binary
//! weight format.
//!
//! All arithmetic is 32-bit with a fixed summation order (input channel,
//! then kernel row, then kernel column), so repeated runs and shifted crops
//! produce bitwise-identical activations. That property is load-bearing:
//! the dense extractor's homogeneity guarantee is checked bitwise.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::geometry::{output_extent, LayerKind, NetSpec};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Error, Debug)]
pub enum CnnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("layer index {index} out of range 1..={count}")]
    LayerIndexOutOfRange { index: usize, count: usize },
    #[error("pool layers with padding are not supported in the forward pass")]
    PoolPadding,
    #[error("norm window must be odd and <= channel count, got n={n} with {channels} channels")]
    NormWindow { n: usize, channels: usize },
    #[error("weight file: bad magic")]
    BadMagic,
    #[error("weight file: unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("weight file: truncated")]
    Truncated,
    #[error("weight file does not match net: {0}")]
    WeightShapeMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

/// Kernels and biases of one conv layer. Kernel layout: out x in x W x W,
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub out_channels: usize,
    pub in_channels: usize,
    pub window: usize,
    pub kernels: Vec<f32>,
    pub bias: Vec<f32>,
}

impl ConvWeights {
    #[inline]
    fn tap(&self, o: usize, c: usize, ky: usize, kx: usize) -> f32 {
        self.kernels[((o * self.in_channels + c) * self.window + ky) * self.window + kx]
    }
}

/// Constants of the across-channel contrast normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormParams {
    pub k: f64,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for NormParams {
    fn default() -> Self {
        NormParams {
            k: 2.0,
            n: 5,
            alpha: 1e-4,
            beta: 0.75,
        }
    }
}

/// All learnable state of a net: one `ConvWeights` per conv layer, in layer
/// order, plus the shared norm constants.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub convs: Vec<ConvWeights>,
    pub norm: NormParams,
}

/// Deterministic Gaussian init (std 0.01), zero biases. The same seed always
/// produces the same bytes.
pub fn init_weights(net: &NetSpec, seed: u64) -> WeightSet {
    let base = Rng::new(seed);
    let mut convs = Vec::new();
    let mut conv_index = 0u64;
    for layer in &net.layers {
        if layer.kind != LayerKind::Conv {
            continue;
        }
        let mut rng = base.fork(conv_index);
        conv_index += 1;
        let (out_c, in_c, w) = (
            layer.out_channels as usize,
            layer.in_channels as usize,
            layer.window as usize,
        );
        let kernels = (0..out_c * in_c * w * w)
            .map(|_| rng.normal_f32(0.01))
            .collect();
        convs.push(ConvWeights {
            out_channels: out_c,
            in_channels: in_c,
            window: w,
            kernels,
            bias: vec![0.0; out_c],
        });
    }
    WeightSet {
        convs,
        norm: NormParams::default(),
    }
}

/// Check that a weight set matches a net's conv layers exactly.
pub fn audit_weights(net: &NetSpec, weights: &WeightSet) -> Result<(), CnnError> {
    let conv_layers: Vec<_> = net
        .layers
        .iter()
        .filter(|l| l.kind == LayerKind::Conv)
        .collect();
    if conv_layers.len() != weights.convs.len() {
        return Err(CnnError::WeightShapeMismatch(format!(
            "net has {} conv layers, weights have {}",
            conv_layers.len(),
            weights.convs.len()
        )));
    }
    for (i, (layer, w)) in conv_layers.iter().zip(&weights.convs).enumerate() {
        if layer.out_channels as usize != w.out_channels
            || layer.in_channels as usize != w.in_channels
            || layer.window as usize != w.window
        {
            return Err(CnnError::WeightShapeMismatch(format!(
                "conv layer {}: net wants {}x{}x{w1}x{w1}, weights are {}x{}x{w2}x{w2}",
                i + 1,
                layer.out_channels,
                layer.in_channels,
                w.out_channels,
                w.in_channels,
                w1 = layer.window,
                w2 = w.window,
            )));
        }
        if w.kernels.len() != w.out_channels * w.in_channels * w.window * w.window
            || w.bias.len() != w.out_channels
        {
            return Err(CnnError::WeightShapeMismatch(format!(
                "conv layer {}: data length inconsistent",
                i + 1
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Primitive layers
// ---------------------------------------------------------------------------

/// Strided 2-D convolution with zero padding.
///
/// `out[o][y][x] = bias[o] + sum_{c,ky,kx} in[c][y*s+ky-P][x*s+kx-P] * k[o][c][ky][kx]`
///
/// Out-of-range taps read zero padding and are skipped; skipping is bitwise
/// equivalent to adding the zero products because accumulators never reach
/// negative zero (biases start at +0.0).
pub fn conv2d(
    input: &Tensor,
    weights: &ConvWeights,
    stride: usize,
    pad: usize,
) -> Result<Tensor, CnnError> {
    if input.channels != weights.in_channels {
        return Err(CnnError::ShapeMismatch(format!(
            "conv expects {} input channels, got {}",
            weights.in_channels, input.channels
        )));
    }
    if input.height != input.width {
        return Err(CnnError::ShapeMismatch("conv input must be square".into()));
    }
    let out_size = output_extent(
        input.width as u32,
        &crate::geometry::LayerSpec::conv(weights.window as u32, stride as u32, pad as u32, 1, 1),
    )
    .ok_or_else(|| CnnError::ShapeMismatch("conv output extent < 1".into()))?
        as usize;

    let w = weights.window;
    let in_size = input.width;
    let mut out = Tensor::zeros(weights.out_channels, out_size, out_size);
    for o in 0..weights.out_channels {
        let plane = out.channel_mut(o);
        plane.fill(weights.bias[o]);
        for c in 0..input.channels {
            for ky in 0..w {
                for kx in 0..w {
                    let tap = weights.tap(o, c, ky, kx);
                    if tap == 0.0 {
                        // Zero taps contribute +/-0.0 products; skipping them
                        // is bitwise-neutral and saves work on sparse kernels.
                        continue;
                    }
                    for oy in 0..out_size {
                        let iy = (oy * stride + ky) as i64 - pad as i64;
                        if iy < 0 || iy >= in_size as i64 {
                            continue;
                        }
                        let in_row = input.row(c, iy as usize);
                        let out_row = &mut plane[oy * out_size..(oy + 1) * out_size];
                        for (ox, acc) in out_row.iter_mut().enumerate() {
                            let ix = (ox * stride + kx) as i64 - pad as i64;
                            if ix < 0 || ix >= in_size as i64 {
                                continue;
                            }
                            *acc += tap * in_row[ix as usize];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Max over W x W windows, channels independent, floor output size.
pub fn maxpool(input: &Tensor, window: usize, stride: usize) -> Result<Tensor, CnnError> {
    let out_h = pooled_extent(input.height, window, stride)?;
    let out_w = pooled_extent(input.width, window, stride)?;
    let mut out = Tensor::zeros(input.channels, out_h, out_w);
    for c in 0..input.channels {
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut m = f32::NEG_INFINITY;
                for ky in 0..window {
                    let row = input.row(c, oy * stride + ky);
                    for kx in 0..window {
                        let v = row[ox * stride + kx];
                        if v > m {
                            m = v;
                        }
                    }
                }
                out.set(c, oy, ox, m);
            }
        }
    }
    Ok(out)
}

fn pooled_extent(input: usize, window: usize, stride: usize) -> Result<usize, CnnError> {
    if window > input {
        return Err(CnnError::ShapeMismatch(format!(
            "pool window {window} larger than input {input}"
        )));
    }
    Ok((input - window) / stride + 1)
}

/// Across-channel local response normalization with boundary clamping:
/// `out[c] = in[c] / (k + alpha * sum_{c' in window(c)} in[c']^2)^beta`.
pub fn lrn(input: &Tensor, params: &NormParams) -> Result<Tensor, CnnError> {
    if params.n.is_multiple_of(2) || params.n > input.channels {
        return Err(CnnError::NormWindow {
            n: params.n,
            channels: input.channels,
        });
    }
    let half = params.n / 2;
    let mut out = Tensor::zeros(input.channels, input.height, input.width);
    for y in 0..input.height {
        for x in 0..input.width {
            for c in 0..input.channels {
                let lo = c.saturating_sub(half);
                let hi = (c + half).min(input.channels - 1);
                let mut sum = 0.0f64;
                for cc in lo..=hi {
                    let v = input.at(cc, y, x) as f64;
                    sum += v * v;
                }
                let denom = (params.k + params.alpha * sum).powf(params.beta);
                out.set(c, y, x, (input.at(c, y, x) as f64 / denom) as f32);
            }
        }
    }
    Ok(out)
}

/// Elementwise max(0, x).
pub fn relu(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Stacked forward pass
// ---------------------------------------------------------------------------

/// Run `crop` through the stack up to and including geometry-active layer
/// `layer` (1-based conv/pool index), plus any geometry-neutral layers
/// (relu/norm) that immediately follow it. Features are therefore
/// post-activation, which keeps them sparse and non-negative.
pub fn forward_to_layer(
    net: &NetSpec,
    weights: &WeightSet,
    crop: &Tensor,
    layer: usize,
) -> Result<Tensor, CnnError> {
    let num_active = net.num_active();
    if layer == 0 || layer > num_active {
        return Err(CnnError::LayerIndexOutOfRange {
            index: layer,
            count: num_active,
        });
    }
    audit_weights(net, weights)?;
    if crop.channels != net.input_channels as usize
        || crop.height != net.input_size as usize
        || crop.width != net.input_size as usize
    {
        return Err(CnnError::ShapeMismatch(format!(
            "crop is {}x{}x{}, net expects {}x{s}x{s}",
            crop.channels,
            crop.height,
            crop.width,
            net.input_channels,
            s = net.input_size
        )));
    }

    let mut current = crop.clone();
    let mut conv_index = 0;
    let mut active_seen = 0;
    for spec in &net.layers {
        if spec.kind.is_active() {
            if active_seen == layer {
                break;
            }
            active_seen += 1;
        }
        match spec.kind {
            LayerKind::Conv => {
                let w = &weights.convs[conv_index];
                conv_index += 1;
                current = conv2d(&current, w, spec.stride as usize, spec.padding as usize)?;
            }
            LayerKind::Pool => {
                if spec.padding != 0 {
                    return Err(CnnError::PoolPadding);
                }
                current = maxpool(&current, spec.window as usize, spec.stride as usize)?;
            }
            LayerKind::Norm => {
                current = lrn(&current, &weights.norm)?;
            }
            LayerKind::Relu => {
                current = relu(&current);
            }
        }
    }
    Ok(current)
}

// ---------------------------------------------------------------------------
// Weight file format
// ---------------------------------------------------------------------------
//
// magic "DNPW" | version u32 | conv count u32
// per conv layer: out,in,W,W (4 x u32) | kernel f32s | bias f32s
// trailer: norm constants k, n, alpha, beta (4 x f64)
// Everything little-endian.

const WEIGHT_MAGIC: &[u8; 4] = b"DNPW";
const WEIGHT_VERSION: u32 = 1;

pub fn save_weights(path: &Path, weights: &WeightSet) -> Result<(), CnnError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(WEIGHT_MAGIC)?;
    f.write_all(&WEIGHT_VERSION.to_le_bytes())?;
    f.write_all(&(weights.convs.len() as u32).to_le_bytes())?;
    for c in &weights.convs {
        for dim in [c.out_channels, c.in_channels, c.window, c.window] {
            f.write_all(&(dim as u32).to_le_bytes())?;
        }
        for v in &c.kernels {
            f.write_all(&v.to_le_bytes())?;
        }
        for v in &c.bias {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    for v in [
        weights.norm.k,
        weights.norm.n as f64,
        weights.norm.alpha,
        weights.norm.beta,
    ] {
        f.write_all(&v.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

/// Load weights and audit them against `net`.
pub fn load_weights(path: &Path, net: &NetSpec) -> Result<WeightSet, CnnError> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut f, &mut magic)?;
    if &magic != WEIGHT_MAGIC {
        return Err(CnnError::BadMagic);
    }
    let version = read_u32(&mut f)?;
    if version != WEIGHT_VERSION {
        return Err(CnnError::UnsupportedVersion(version));
    }
    let count = read_u32(&mut f)? as usize;
    let mut convs = Vec::with_capacity(count);
    for _ in 0..count {
        let out_c = read_u32(&mut f)? as usize;
        let in_c = read_u32(&mut f)? as usize;
        let wy = read_u32(&mut f)? as usize;
        let wx = read_u32(&mut f)? as usize;
        if wy != wx {
            return Err(CnnError::WeightShapeMismatch("non-square kernel".into()));
        }
        let kernels = read_f32s(&mut f, out_c * in_c * wy * wx)?;
        let bias = read_f32s(&mut f, out_c)?;
        convs.push(ConvWeights {
            out_channels: out_c,
            in_channels: in_c,
            window: wy,
            kernels,
            bias,
        });
    }
    let k = read_f64(&mut f)?;
    let n = read_f64(&mut f)?;
    let alpha = read_f64(&mut f)?;
    let beta = read_f64(&mut f)?;
    let weights = WeightSet {
        convs,
        norm: NormParams {
            k,
            n: n as usize,
            alpha,
            beta,
        },
    };
    audit_weights(net, &weights)?;
    Ok(weights)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), CnnError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            CnnError::Truncated
        } else {
            CnnError::Io(e)
        }
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CnnError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, CnnError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_f32s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f32>, CnnError> {
    let mut bytes = vec![0u8; count * 4];
    read_exact(r, &mut bytes)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}
