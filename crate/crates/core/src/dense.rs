//! Network-convolution: tile a high-resolution image with input-sized crops,
//! keep the padding-free interior feature points of each crop, and assemble
//! one whole-image `FeatureGrid` with exact pixel coordinates.
//!
//! Per crop, only the maximal centered block of interior cells is retained
//! (the central 5x5 of the 13x13 conv5 map on the reference net). Retained
//! blocks of adjacent crops abut exactly, so the crop shift equals the
//! retained span in pixels (5 * 16 = 80 for reference conv5) and every grid
//! point is produced by exactly one crop.
//!
//! Because interior cells never read zero padding, the value of a grid point
//! is a function of its receptive-field pixels only. Any crop whose retained
//! block covers the point yields the same bits; that homogeneity is what
//! makes dense extraction interchangeable with per-region evaluation.
//!
//! Edge rule: when the shift divides the image extent the image is treated
//! as that whole number of tiles (a 640x480 image at conv5 is 8x6 crops for
//! a 40x30 grid); otherwise crops are placed while they fit, plus one final
//! crop for the partial strip. Crops may overhang the image; the working
//! canvas is zero-extended on the right/bottom to fit them, and images
//! smaller than one crop are zero-padded up to crop size the same way.
//! Grid points in the overhang score against that zero canvas and are not
//! interior.

use rayon::prelude::*;
use thiserror::Error;

use crate::cnn::{forward_to_layer, CnnError, WeightSet};
use crate::geometry::{self, GeometryError, NetSpec};
use crate::grid::FeatureGrid;
use crate::image::Image;
use crate::tensor::Tensor;

#[derive(Error, Debug)]
pub enum DenseError {
    #[error("image has a zero dimension")]
    EmptyImage,
    #[error("layer {0} has no centered interior block; nothing can be retained")]
    NoInteriorBlock(usize),
    #[error("layer {0} has a fractional top-left center; grids need integral pixel coordinates")]
    FractionalOrigin(usize),
    #[error("crop origin ({x}, {y}) outside the input tensor")]
    CropOutOfBounds { x: usize, y: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Cnn(#[from] CnnError),
}

/// Crop placement and grid layout for one (image size, net, layer) triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TilingPlan {
    /// Geometry-active layer index the plan extracts from.
    pub layer: usize,
    /// Pixel distance between adjacent grid points (S_L).
    pub pixel_stride: u64,
    /// Inclusive retained cell range per crop, per axis.
    pub retained: (u32, u32),
    /// Crop-to-crop shift in pixels: retained span * pixel stride.
    pub shift: u64,
    pub crops_x: usize,
    pub crops_y: usize,
    /// Real image size (w, h).
    pub image: (usize, usize),
    /// Zero-extended working canvas (w, h); >= image and >= one crop.
    pub canvas: (usize, usize),
    /// 0-based pixel coordinate of grid point (0, 0).
    pub grid_origin: (i64, i64),
    pub grid_cols: usize,
    pub grid_rows: usize,
}

impl TilingPlan {
    /// Row-major crop origins in canvas coordinates.
    pub fn crop_origins(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.crops_x * self.crops_y);
        for cy in 0..self.crops_y {
            for cx in 0..self.crops_x {
                out.push((cx * self.shift as usize, cy * self.shift as usize));
            }
        }
        out
    }

    pub fn crop_count(&self) -> usize {
        self.crops_x * self.crops_y
    }

    /// Cells retained per crop along one axis.
    pub fn retained_len(&self) -> usize {
        (self.retained.1 - self.retained.0 + 1) as usize
    }
}

fn crops_along(extent: usize, input: usize, shift: usize) -> usize {
    if extent <= input {
        return 1;
    }
    if extent.is_multiple_of(shift) {
        // Whole number of tiles: one crop per tile. Always at least as many
        // as the fitted rule needs, since the retained span is below the
        // input size.
        extent / shift
    } else {
        // Crops that fit fully, plus one for the trailing partial strip.
        (extent - input).div_ceil(shift) + 1
    }
}

/// Lay out crops and the resulting grid for an image.
pub fn plan_tiling(
    image_w: usize,
    image_h: usize,
    net: &NetSpec,
    layer: usize,
) -> Result<TilingPlan, DenseError> {
    if image_w == 0 || image_h == 0 {
        return Err(DenseError::EmptyImage);
    }
    let stride = geometry::layer_stride(net, layer)?;
    let (lo, hi) =
        geometry::centered_interior_range(net, layer)?.ok_or(DenseError::NoInteriorBlock(layer))?;
    let span = (hi - lo + 1) as u64;
    let shift = span * stride;
    let center = geometry::top_left_center(net, layer)?;
    // 0-based coordinate of the first retained cell of the crop at (0, 0).
    let origin = center
        .add_int(-1)
        .add_int(lo as i64 * stride as i64)
        .to_i64()
        .ok_or(DenseError::FractionalOrigin(layer))?;

    let input = net.input_size as usize;
    let crops_x = crops_along(image_w, input, shift as usize);
    let crops_y = crops_along(image_h, input, shift as usize);
    let canvas_w = ((crops_x - 1) * shift as usize + input).max(image_w);
    let canvas_h = ((crops_y - 1) * shift as usize + input).max(image_h);

    Ok(TilingPlan {
        layer,
        pixel_stride: stride,
        retained: (lo, hi),
        shift,
        crops_x,
        crops_y,
        image: (image_w, image_h),
        canvas: (canvas_w, canvas_h),
        grid_origin: (origin, origin),
        grid_cols: span as usize * crops_x,
        grid_rows: span as usize * crops_y,
    })
}

/// Preprocess an image and zero-extend it to the plan's canvas.
pub fn canvas_tensor(image: &Image, net: &NetSpec, plan: &TilingPlan) -> Tensor {
    let src = image.to_input_tensor(net.input_channels as usize);
    if (image.width, image.height) == plan.canvas {
        return src;
    }
    let mut canvas = Tensor::zeros(src.channels, plan.canvas.1, plan.canvas.0);
    for c in 0..src.channels {
        for y in 0..src.height {
            let row = src.row(c, y);
            canvas.channel_mut(c)[y * plan.canvas.0..y * plan.canvas.0 + src.width]
                .copy_from_slice(row);
        }
    }
    canvas
}

/// Forward one input-sized crop of `input` at `origin` and keep the retained
/// interior block as a small grid in global pixel coordinates.
pub fn extract_crop_features(
    net: &NetSpec,
    weights: &WeightSet,
    input: &Tensor,
    origin: (usize, usize),
    layer: usize,
) -> Result<FeatureGrid, DenseError> {
    let size = net.input_size as usize;
    if origin.0 + size > input.width || origin.1 + size > input.height {
        return Err(DenseError::CropOutOfBounds {
            x: origin.0,
            y: origin.1,
        });
    }
    let stride = geometry::layer_stride(net, layer)?;
    let (lo, hi) =
        geometry::centered_interior_range(net, layer)?.ok_or(DenseError::NoInteriorBlock(layer))?;
    let center = geometry::top_left_center(net, layer)?;
    let first = center
        .add_int(-1)
        .add_int(lo as i64 * stride as i64)
        .to_i64()
        .ok_or(DenseError::FractionalOrigin(layer))?;

    let crop = input.crop(origin.0, origin.1, size);
    let maps = forward_to_layer(net, weights, &crop, layer)?;
    let span = (hi - lo + 1) as usize;
    let dim = maps.channels;
    let mut grid = FeatureGrid::zeros(
        (origin.0 as i64 + first, origin.1 as i64 + first),
        stride as u32,
        span,
        span,
        dim,
    );
    for v in 0..span {
        for u in 0..span {
            let vec = grid.point_mut(u, v);
            for (c, slot) in vec.iter_mut().enumerate() {
                *slot = maps.at(c, lo as usize + v, lo as usize + u);
            }
        }
    }
    Ok(grid)
}

/// Dense whole-image extraction: run every crop of the tiling plan and
/// assemble the retained blocks into one uniform grid. Each grid point is
/// written exactly once.
pub fn network_convolution(
    net: &NetSpec,
    weights: &WeightSet,
    image: &Image,
    layer: usize,
) -> Result<FeatureGrid, DenseError> {
    let plan = plan_tiling(image.width, image.height, net, layer)?;
    let canvas = canvas_tensor(image, net, &plan);
    network_convolution_planned(net, weights, &canvas, &plan)
}

/// As `network_convolution`, with the canvas and plan prepared by the
/// caller (useful when extracting several layers from one image).
pub fn network_convolution_planned(
    net: &NetSpec,
    weights: &WeightSet,
    canvas: &Tensor,
    plan: &TilingPlan,
) -> Result<FeatureGrid, DenseError> {
    let span = plan.retained_len();
    let origins = plan.crop_origins();
    let blocks: Result<Vec<FeatureGrid>, DenseError> = origins
        .par_iter()
        .map(|&o| extract_crop_features(net, weights, canvas, o, plan.layer))
        .collect();
    let blocks = blocks?;

    let dim = blocks[0].dim;
    let mut grid = FeatureGrid::zeros(
        plan.grid_origin,
        plan.pixel_stride as u32,
        plan.grid_cols,
        plan.grid_rows,
        dim,
    );
    let mut written = vec![false; plan.grid_cols * plan.grid_rows];
    for (ci, block) in blocks.iter().enumerate() {
        let cx = ci % plan.crops_x;
        let cy = ci / plan.crops_x;
        for v in 0..span {
            for u in 0..span {
                let gu = cx * span + u;
                let gv = cy * span + v;
                let idx = gv * plan.grid_cols + gu;
                assert!(!written[idx], "grid point written twice");
                written[idx] = true;
                grid.point_mut(gu, gv).copy_from_slice(block.point(u, v));
            }
        }
    }
    debug_assert!(written.iter().all(|&w| w));
    Ok(grid)
}

/// Inclusive index range along one grid axis, or `None` when empty.
pub type IndexRange = Option<(usize, usize)>;

/// Inclusive grid index ranges (cols, rows) whose receptive field lies fully
/// inside the real image, making their values crop-placement independent.
pub fn interior_grid_ranges(
    plan: &TilingPlan,
    net: &NetSpec,
) -> Result<(IndexRange, IndexRange), DenseError> {
    let support = geometry::cell_support(net, plan.layer, plan.retained.0)?;
    let s = plan.pixel_stride as i64;
    let range = |extent: usize, count: usize| -> IndexRange {
        // box of grid index g: [support.lo + g*s, support.hi + g*s]
        let lo_idx = (0..count).find(|&g| support.lo + g as i64 * s >= 0)?;
        let hi_idx = (0..count)
            .rev()
            .find(|&g| support.hi + g as i64 * s < extent as i64)?;
        (lo_idx <= hi_idx).then_some((lo_idx, hi_idx))
    };
    Ok((
        range(plan.image.0, plan.grid_cols),
        range(plan.image.1, plan.grid_rows),
    ))
}
