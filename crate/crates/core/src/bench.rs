//! Model-convolution accounting: dense whole-image extraction versus
//! forwarding every proposal through the net once. Counts are exact and
//! machine-independent; wall-clock timing is optional and non-normative.

use std::time::Instant;

use thiserror::Error;

use crate::cnn::{forward_to_layer, CnnError, WeightSet};
use crate::dense::{network_convolution, plan_tiling, DenseError};
use crate::geometry::NetSpec;
use crate::image::Image;
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Error, Debug)]
pub enum BenchError {
    #[error(transparent)]
    Dense(#[from] DenseError),
    #[error(transparent)]
    Cnn(#[from] CnnError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub image: (usize, usize),
    pub proposals: usize,
    /// Model convolutions for dense whole-image extraction.
    pub dense_convolutions: usize,
    /// Model convolutions when each proposal is resized and forwarded once.
    pub per_region_convolutions: usize,
    /// per_region / dense.
    pub ratio: f64,
    /// Measured wall-clock seconds, when timing was requested. Hardware
    /// dependent, reported for context only.
    pub dense_seconds: Option<f64>,
    pub per_region_seconds: Option<f64>,
}

impl BenchReport {
    pub fn csv_header() -> &'static str {
        "width,height,proposals,dense_convolutions,per_region_convolutions,ratio"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.3}",
            self.image.0,
            self.image.1,
            self.proposals,
            self.dense_convolutions,
            self.per_region_convolutions,
            self.ratio
        )
    }

    pub fn human_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "image {}x{}, {} proposals\n",
            self.image.0, self.image.1, self.proposals
        ));
        out.push_str(&format!("{:<24} {:>12}\n", "path", "convolutions"));
        out.push_str(&format!(
            "{:<24} {:>12}\n",
            "per-region (resize each)", self.per_region_convolutions
        ));
        out.push_str(&format!(
            "{:<24} {:>12}\n",
            "dense (network-conv)", self.dense_convolutions
        ));
        out.push_str(&format!(
            "speedup in model convolutions: {:.1}x\n",
            self.ratio
        ));
        if let (Some(d), Some(p)) = (self.dense_seconds, self.per_region_seconds) {
            out.push_str(&format!(
                "wall clock (non-normative, this machine): dense {:.3}s vs per-region {:.3}s\n",
                d, p
            ));
        }
        out
    }
}

/// Count model convolutions for both paths. Counts depend only on the image
/// size, the net, the layer, and the proposal count.
pub fn bench_convolutions(
    image_w: usize,
    image_h: usize,
    proposals: usize,
    net: &NetSpec,
    layer: usize,
) -> Result<BenchReport, BenchError> {
    let plan = plan_tiling(image_w, image_h, net, layer)?;
    let dense = plan.crop_count();
    let per_region = proposals;
    Ok(BenchReport {
        image: (image_w, image_h),
        proposals,
        dense_convolutions: dense,
        per_region_convolutions: per_region,
        ratio: per_region as f64 / dense as f64,
        dense_seconds: None,
        per_region_seconds: None,
    })
}

/// As `bench_convolutions`, plus wall-clock measurements on a deterministic
/// noise image. The per-region path is timed on a sample of proposals and
/// extrapolated.
pub fn bench_with_timing(
    image_w: usize,
    image_h: usize,
    proposals: usize,
    net: &NetSpec,
    layer: usize,
    weights: &WeightSet,
) -> Result<BenchReport, BenchError> {
    let mut report = bench_convolutions(image_w, image_h, proposals, net, layer)?;

    let mut rng = Rng::new(0xbe9c);
    let mut img = Image::new(image_w, image_h, 3);
    for v in img.data.iter_mut() {
        *v = rng.below(256) as u8;
    }

    let t0 = Instant::now();
    let _ = network_convolution(net, weights, &img, layer)?;
    report.dense_seconds = Some(t0.elapsed().as_secs_f64());

    // per-region: nearest-neighbor resize of a random box to the input size,
    // one forward each; extrapolate from a small sample
    let input = net.input_size as usize;
    let sample = proposals.clamp(1, 8);
    let tensor = img.to_input_tensor(net.input_channels as usize);
    let t1 = Instant::now();
    for _ in 0..sample {
        let bw = rng.range_u64(32, image_w as u64) as usize;
        let bh = rng.range_u64(32, image_h as u64) as usize;
        let x0 = rng.below((image_w - bw + 1) as u64) as usize;
        let y0 = rng.below((image_h - bh + 1) as u64) as usize;
        let mut crop = Tensor::zeros(tensor.channels, input, input);
        for c in 0..tensor.channels {
            for y in 0..input {
                let sy = y0 + y * bh / input;
                for x in 0..input {
                    let sx = x0 + x * bw / input;
                    crop.set(c, y, x, tensor.at(c, sy, sx));
                }
            }
        }
        let _ = forward_to_layer(net, weights, &crop, layer)?;
    }
    let per_sample = t1.elapsed().as_secs_f64() / sample as f64;
    report.per_region_seconds = Some(per_sample * proposals as f64);
    Ok(report)
}
