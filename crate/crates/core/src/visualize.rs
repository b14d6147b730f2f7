//! Feature-importance visualization: which neural-pattern dimensions the
//! boosted detector selects, and the image patches that excite the top
//! dimension most.
//!
//! Occurrence counting over the final weak-classifier set ranks dimensions;
//! the top dimension is then run as a detector of its own, scoring every
//! feature point of the dataset by its raw activation and cropping the
//! receptive field around the strongest responses.

use thiserror::Error;

use crate::cnn::WeightSet;
use crate::dense::{network_convolution, DenseError};
use crate::detector::Cascade;
use crate::geometry::{self, GeometryError, NetSpec};
use crate::image::Image;
use crate::regionlets::Family;

#[derive(Error, Debug)]
pub enum VisError {
    #[error("cascade selects no neural-pattern features")]
    NoDnpFeatures,
    #[error(transparent)]
    Dense(#[from] DenseError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Occurrence count of one selected feature dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimCount {
    pub family: Family,
    pub dim: usize,
    pub count: usize,
}

/// One high-response patch for the top dimension.
#[derive(Debug)]
pub struct PatchHit {
    pub image_id: String,
    pub grid_point: (usize, usize),
    /// Pixel coordinate of the feature point (patch center).
    pub center: (i64, i64),
    pub value: f32,
    pub patch: Image,
}

#[derive(Debug)]
pub struct VizReport {
    /// All selected neural-pattern dimensions, most frequent first.
    pub histogram: Vec<DimCount>,
    /// The dimension the patches were ranked by.
    pub top: DimCount,
    /// Patch side length: the layer's receptive-field extent.
    pub patch_side: u64,
    pub hits: Vec<PatchHit>,
}

/// Histogram of neural-pattern dimensions across all weak classifiers,
/// sorted by descending count (ties toward the smaller dimension).
pub fn dnp_dimension_histogram(cascade: &Cascade) -> Result<Vec<DimCount>, VisError> {
    let mut counts: Vec<DimCount> = Vec::new();
    for stage in &cascade.stages {
        for weak in &stage.weaks {
            let cfg = &cascade.pool[weak.config_index];
            if let Family::Dnp(_) = cfg.family {
                match counts
                    .iter_mut()
                    .find(|c| c.family == cfg.family && c.dim == cfg.dim)
                {
                    Some(c) => c.count += 1,
                    None => counts.push(DimCount {
                        family: cfg.family,
                        dim: cfg.dim,
                        count: 1,
                    }),
                }
            }
        }
    }
    if counts.is_empty() {
        return Err(VisError::NoDnpFeatures);
    }
    counts.sort_by(|a, b| b.count.cmp(&a.count).then(a.dim.cmp(&b.dim)));
    Ok(counts)
}

/// Rank the dataset's feature points by the top selected dimension and crop
/// the `k` highest-response receptive fields. Patches whose receptive field
/// leaves the image are skipped, so every emitted patch has the full extent
/// and its center sits exactly on a grid point.
pub fn visualize_top_patterns(
    cascade: &Cascade,
    images: &[(String, Image)],
    net: &NetSpec,
    weights: &WeightSet,
    k: usize,
) -> Result<VizReport, VisError> {
    let histogram = dnp_dimension_histogram(cascade)?;
    let top = histogram[0].clone();
    let Family::Dnp(layer) = top.family else {
        unreachable!("histogram only holds dnp entries")
    };
    let patch_side = geometry::receptive_field_extent(net, layer)?;

    let mut hits: Vec<(f32, usize, usize, usize)> = Vec::new(); // value, image, u, v
    let mut grids = Vec::with_capacity(images.len());
    for (ii, (_, img)) in images.iter().enumerate() {
        let grid = network_convolution(net, weights, img, layer)?;
        for v in 0..grid.rows {
            for u in 0..grid.cols {
                hits.push((grid.point(u, v)[top.dim], ii, u, v));
            }
        }
        grids.push(grid);
    }
    hits.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| (a.1, a.2, a.3).cmp(&(b.1, b.2, b.3)))
    });

    let half = ((patch_side - 1) / 2) as i64;
    let mut out = Vec::new();
    for (value, ii, u, v) in hits {
        if out.len() >= k {
            break;
        }
        let (id, img) = &images[ii];
        let (cx, cy) = grids[ii].coord(u, v);
        let (x0, y0) = (cx - half, cy - half);
        let side = patch_side as i64;
        if x0 < 0 || y0 < 0 || x0 + side > img.width as i64 || y0 + side > img.height as i64 {
            continue;
        }
        let mut patch = Image::new(side as usize, side as usize, img.channels);
        for y in 0..side as usize {
            for x in 0..side as usize {
                for c in 0..img.channels {
                    patch.set(x, y, c, img.get(x0 as usize + x, y0 as usize + y, c));
                }
            }
        }
        out.push(PatchHit {
            image_id: id.clone(),
            grid_point: (u, v),
            center: (cx, cy),
            value,
            patch,
        });
    }
    Ok(VizReport {
        histogram,
        top,
        patch_side,
        hits: out,
    })
}
