//! End-to-end orchestration: per-image family grids, the desk-scale training
//! protocol over a synthetic dataset manifest, and manifest-level detection
//! and evaluation. The CLI and the acceptance suite both drive this module.

use rayon::prelude::*;
use thiserror::Error;

use crate::cnn::{CnnError, WeightSet};
use crate::dense::{network_convolution, DenseError};
use crate::detector::{
    detect, train_cascade, Cascade, DetectorError, TrainImage, TrainParams, TrainTrace,
};
use crate::eval::EvalDetection;
use crate::geometry::{GeometryError, NetSpec};
use crate::hog::{hog_extract, HOG_DIM};
use crate::image::Image;
use crate::regionlets::{sample_configurations, Family, FamilyGrids, PixelRect, RegionletConfig};
use crate::rng::Rng;
use crate::synth::{DatasetManifest, SynthError};

#[derive(Error, Debug)]
pub enum PipelineError {
    #[error("family {0} refers to no known feature source")]
    UnknownFamily(Family),
    #[error(transparent)]
    Dense(#[from] DenseError),
    #[error(transparent)]
    Cnn(#[from] CnnError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

/// The full detection protocol: net, features, pool, boosting, proposals.
#[derive(Debug, Clone)]
pub struct Protocol {
    pub net: NetSpec,
    pub weight_seed: u64,
    pub families: Vec<Family>,
    pub pool_size: usize,
    pub k_max: usize,
    pub config_seed: u64,
    pub train: TrainParams,
    pub proposal_scales: Vec<u32>,
    pub proposal_ratios: Vec<f64>,
    pub proposal_stride: usize,
    pub nms_iou: f64,
    pub label: String,
}

impl Default for Protocol {
    /// Desk-scale defaults: tiny net with random weights, neural patterns
    /// from its last conv layer, 10k-config pool, 4 stages of 64 weaks.
    fn default() -> Self {
        Protocol {
            net: NetSpec::tiny(),
            weight_seed: 20_14,
            families: vec![Family::Dnp(5)],
            pool_size: 10_000,
            k_max: 3,
            config_seed: 31_41,
            train: TrainParams::default(),
            proposal_scales: vec![36, 50, 70],
            proposal_ratios: vec![0.7, 1.0, 1.4],
            proposal_stride: 12,
            nms_iou: 0.5,
            label: "target".into(),
        }
    }
}

impl Protocol {
    /// Feature dimensionality per family, for configuration sampling.
    pub fn family_dims(&self) -> Result<Vec<(Family, usize)>, PipelineError> {
        self.families
            .iter()
            .map(|f| match f {
                Family::Dnp(layer) => Ok((*f, self.net.active_channels(*layer)? as usize)),
                Family::Hog => Ok((*f, HOG_DIM)),
            })
            .collect()
    }

    pub fn sample_pool(&self) -> Result<Vec<RegionletConfig>, PipelineError> {
        let dims = self.family_dims()?;
        Ok(sample_configurations(
            self.config_seed,
            self.pool_size,
            &dims,
            self.k_max,
        ))
    }

    pub fn proposals_for(&self, width: usize, height: usize) -> Vec<PixelRect> {
        crate::detector::propose_grid(
            width,
            height,
            &self.proposal_scales,
            &self.proposal_ratios,
            self.proposal_stride,
        )
    }
}

/// Extract every requested family's grid for one image.
pub fn family_grids(
    net: &NetSpec,
    weights: &WeightSet,
    image: &Image,
    families: &[Family],
) -> Result<FamilyGrids, PipelineError> {
    let mut grids = FamilyGrids::new();
    for family in families {
        match family {
            Family::Dnp(layer) => {
                grids.insert(*family, network_convolution(net, weights, image, *layer)?);
            }
            Family::Hog => {
                grids.insert(*family, hog_extract(image));
            }
        }
    }
    Ok(grids)
}

/// Externally supplied proposals, keyed by image id. Images without an
/// entry get no windows.
pub type ProposalMap = std::collections::HashMap<String, Vec<PixelRect>>;

fn windows_for(
    entry_id: &str,
    width: usize,
    height: usize,
    protocol: &Protocol,
    proposals: Option<&ProposalMap>,
) -> Vec<PixelRect> {
    match proposals {
        Some(map) => map.get(entry_id).cloned().unwrap_or_default(),
        None => protocol.proposals_for(width, height),
    }
}

/// Load a manifest's images and build per-image training inputs (grids,
/// ground truth, proposals). Runs images in parallel. Proposals come from
/// the protocol's sliding-window lattice unless an external map is given.
pub fn prepare_train_images(
    manifest: &DatasetManifest,
    weights: &WeightSet,
    protocol: &Protocol,
    proposals: Option<&ProposalMap>,
) -> Result<Vec<TrainImage>, PipelineError> {
    manifest
        .entries
        .par_iter()
        .map(|entry| {
            let image = manifest.load_image(entry)?;
            let grids = family_grids(&protocol.net, weights, &image, &protocol.families)?;
            let gt_boxes: Vec<PixelRect> = entry.gt.boxes.iter().map(|b| b.rect()).collect();
            let windows = windows_for(&entry.id, image.width, image.height, protocol, proposals);
            Ok(TrainImage {
                grids,
                gt_boxes,
                proposals: windows,
            })
        })
        .collect()
}

/// Train the protocol's cascade on a manifest with the given weights.
pub fn train_on_manifest_with(
    manifest: &DatasetManifest,
    protocol: &Protocol,
    weights: &WeightSet,
    proposals: Option<&ProposalMap>,
) -> Result<(Cascade, TrainTrace), PipelineError> {
    let pool = protocol.sample_pool()?;
    let images = prepare_train_images(manifest, weights, protocol, proposals)?;
    Ok(train_cascade(&images, &pool, &protocol.train)?)
}

/// Train the protocol's cascade on a manifest, initializing weights from the
/// protocol's seed.
pub fn train_on_manifest(
    manifest: &DatasetManifest,
    protocol: &Protocol,
) -> Result<(Cascade, WeightSet, TrainTrace), PipelineError> {
    let weights = crate::cnn::init_weights(&protocol.net, protocol.weight_seed);
    let (cascade, trace) = train_on_manifest_with(manifest, protocol, &weights, None)?;
    Ok((cascade, weights, trace))
}

/// Detect over every image of a manifest; detections come back sorted by
/// image then descending score.
pub fn detect_on_manifest(
    manifest: &DatasetManifest,
    cascade: &Cascade,
    weights: &WeightSet,
    protocol: &Protocol,
) -> Result<Vec<EvalDetection>, PipelineError> {
    detect_on_manifest_with(manifest, cascade, weights, protocol, None)
}

/// As `detect_on_manifest`, optionally scoring externally supplied proposals
/// instead of the protocol lattice.
pub fn detect_on_manifest_with(
    manifest: &DatasetManifest,
    cascade: &Cascade,
    weights: &WeightSet,
    protocol: &Protocol,
    proposals: Option<&ProposalMap>,
) -> Result<Vec<EvalDetection>, PipelineError> {
    let per_image: Result<Vec<Vec<EvalDetection>>, PipelineError> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let image = manifest.load_image(entry)?;
            let grids = family_grids(&protocol.net, weights, &image, &protocol.families)?;
            let windows = windows_for(&entry.id, image.width, image.height, protocol, proposals);
            let dets = detect(&grids, &windows, cascade, protocol.nms_iou, &protocol.label)?;
            Ok(dets
                .into_iter()
                .map(|d| EvalDetection {
                    image_id: entry.id.clone(),
                    rect: d.rect,
                    score: d.score,
                })
                .collect())
        })
        .collect();
    Ok(per_image?.into_iter().flatten().collect())
}

/// Baseline for sanity checks: the same proposals scored by a seeded uniform
/// random number, with the same NMS applied.
pub fn random_baseline_detections(
    manifest: &DatasetManifest,
    protocol: &Protocol,
    seed: u64,
) -> Result<Vec<EvalDetection>, PipelineError> {
    let base = Rng::new(seed);
    let mut out = Vec::new();
    for (ei, entry) in manifest.entries.iter().enumerate() {
        let mut rng = base.fork(ei as u64);
        let proposals = protocol.proposals_for(entry.gt.width, entry.gt.height);
        let dets: Vec<crate::detector::Detection> = proposals
            .iter()
            .map(|p| crate::detector::Detection {
                rect: *p,
                score: rng.unit_f64() as f32,
                label: protocol.label.clone(),
            })
            .collect();
        for d in crate::detector::nms(dets, protocol.nms_iou) {
            out.push(EvalDetection {
                image_id: entry.id.clone(),
                rect: d.rect,
                score: d.score,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::init_weights;

    #[test]
    fn family_dims_resolve() {
        let p = Protocol {
            families: vec![Family::Dnp(5), Family::Hog],
            ..Protocol::default()
        };
        let dims = p.family_dims().unwrap();
        assert_eq!(dims, vec![(Family::Dnp(5), 32), (Family::Hog, 36)]);
    }

    #[test]
    fn grids_cover_requested_families() {
        let p = Protocol::default();
        let weights = init_weights(&p.net, 3);
        let mut rng = Rng::new(9);
        let mut img = Image::new(96, 96, 3);
        for v in img.data.iter_mut() {
            *v = rng.below(256) as u8;
        }
        let grids = family_grids(&p.net, &weights, &img, &[Family::Dnp(5), Family::Hog]).unwrap();
        assert_eq!(grids.get(Family::Dnp(5)).unwrap().dim, 32);
        assert_eq!(grids.get(Family::Hog).unwrap().dim, 36);
        assert!(grids.get(Family::Dnp(3)).is_none());
    }

    #[test]
    fn proposals_cover_target_sizes() {
        let p = Protocol::default();
        let props = p.proposals_for(320, 320);
        assert!(!props.is_empty());
        // every synthetic target box (sides 32..=81) should have a proposal
        // with IoU >= 0.5 wherever it sits
        let mut rng = Rng::new(55);
        for _ in 0..200 {
            let w = rng.range_u64(33, 80) as i64;
            let h = rng.range_u64((w as u64 * 2 / 3).max(33), (w as u64 * 3 / 2).min(80)) as i64;
            let l = rng.below((320 - w) as u64 + 1) as i64;
            let t = rng.below((320 - h) as u64 + 1) as i64;
            let gt = PixelRect::new(l, t, l + w, t + h);
            let best = props.iter().map(|pr| pr.iou(&gt)).fold(0.0f64, f64::max);
            assert!(best >= 0.5, "gt {gt:?} best iou {best}");
        }
    }
}
