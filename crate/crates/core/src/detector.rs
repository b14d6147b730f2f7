//! Boosting-cascade window classifier over pooled 1-D regionlet features,
//! plus non-maximum suppression and a sliding-window proposer.
//!
//! Training is gentle-style boosting with regression stumps: each round fits
//! a stump on every candidate configuration under the current sample weights,
//! keeps the one with minimal weighted squared error, and updates weights
//! with `w <- w * exp(-y * h(x))`. Stages end at a fixed weak count; the
//! stage rejection threshold is placed so at least the configured fraction
//! of training positives survives, and the next stage mines its negatives
//! from the current cascade's false positives.

use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::regionlets::{
    region_feature, Family, FamilyGrids, Normalizer, PixelRect, RegionletConfig, RegionletError,
};
use crate::rng::Rng;

#[derive(Error, Debug)]
pub enum DetectorError {
    #[error("training needs at least one positive window")]
    NoPositives,
    #[error("training needs at least one negative window")]
    NoNegatives,
    #[error("empty configuration pool")]
    EmptyPool,
    #[error("weak classifier references config {index} outside pool of {size}")]
    BadConfigIndex { index: usize, size: usize },
    #[error("cascade file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Regionlet(#[from] RegionletError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Classifier types
// ---------------------------------------------------------------------------

/// Regression stump on one pooled feature: `left_value` below the threshold,
/// `right_value` at or above it.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakClassifier {
    pub config_index: usize,
    pub threshold: f32,
    pub left_value: f32,
    pub right_value: f32,
}

impl WeakClassifier {
    #[inline]
    pub fn response(&self, v: f32) -> f32 {
        if v < self.threshold {
            self.left_value
        } else {
            self.right_value
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeStage {
    pub weaks: Vec<WeakClassifier>,
    /// Windows whose cumulative score falls below this after the stage are
    /// rejected.
    pub reject_threshold: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainMeta {
    pub seed: u64,
    pub pool_size: usize,
}

/// Ordered rejection stages plus the configuration pool their weaks index.
#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    pub stages: Vec<CascadeStage>,
    pub pool: Vec<RegionletConfig>,
    pub normalizer: Normalizer,
    pub meta: TrainMeta,
}

impl Cascade {
    pub fn families_used(&self) -> Vec<Family> {
        let mut fams: Vec<Family> = self
            .stages
            .iter()
            .flat_map(|s| s.weaks.iter())
            .map(|w| self.pool[w.config_index].family)
            .collect();
        fams.sort();
        fams.dedup();
        fams
    }

    pub fn num_weaks(&self) -> usize {
        self.stages.iter().map(|s| s.weaks.len()).sum()
    }

    fn validate(&self) -> Result<(), DetectorError> {
        for stage in &self.stages {
            for w in &stage.weaks {
                if w.config_index >= self.pool.len() {
                    return Err(DetectorError::BadConfigIndex {
                        index: w.config_index,
                        size: self.pool.len(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreOutcome {
    Accepted(f32),
    Rejected { stage: usize, score: f32 },
}

impl ScoreOutcome {
    pub fn accepted(&self) -> Option<f32> {
        match self {
            ScoreOutcome::Accepted(s) => Some(*s),
            ScoreOutcome::Rejected { .. } => None,
        }
    }
}

/// Evaluate the cascade on one window with early exit at each stage
/// boundary.
pub fn score_window(
    cascade: &Cascade,
    grids: &FamilyGrids,
    window: &PixelRect,
) -> Result<ScoreOutcome, DetectorError> {
    let mut score = 0.0f32;
    for (si, stage) in cascade.stages.iter().enumerate() {
        for weak in &stage.weaks {
            let cfg = &cascade.pool[weak.config_index];
            let v = region_feature(grids, window, cfg, cascade.normalizer)?;
            score += weak.response(v);
        }
        if score < stage.reject_threshold {
            return Ok(ScoreOutcome::Rejected { stage: si, score });
        }
    }
    Ok(ScoreOutcome::Accepted(score))
}

/// Exhaustive evaluation: full score and the per-stage thresholds applied
/// afterwards. Used to cross-check the early-exit path.
pub fn score_window_exhaustive(
    cascade: &Cascade,
    grids: &FamilyGrids,
    window: &PixelRect,
) -> Result<ScoreOutcome, DetectorError> {
    let mut cumulative = Vec::with_capacity(cascade.stages.len());
    let mut score = 0.0f32;
    for stage in &cascade.stages {
        for weak in &stage.weaks {
            let cfg = &cascade.pool[weak.config_index];
            let v = region_feature(grids, window, cfg, cascade.normalizer)?;
            score += weak.response(v);
        }
        cumulative.push(score);
    }
    for (si, stage) in cascade.stages.iter().enumerate() {
        if cumulative[si] < stage.reject_threshold {
            return Ok(ScoreOutcome::Rejected {
                stage: si,
                score: cumulative[si],
            });
        }
    }
    Ok(ScoreOutcome::Accepted(score))
}

// ---------------------------------------------------------------------------
// Detection
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub rect: PixelRect,
    pub score: f32,
    pub label: String,
}

/// Score proposals against per-image grids (computed once per image), drop
/// rejected windows, apply NMS, and sort by descending score.
pub fn detect(
    grids: &FamilyGrids,
    proposals: &[PixelRect],
    cascade: &Cascade,
    nms_iou: f64,
    label: &str,
) -> Result<Vec<Detection>, DetectorError> {
    let scored: Result<Vec<Option<Detection>>, DetectorError> = proposals
        .par_iter()
        .map(|p| {
            Ok(score_window(cascade, grids, p)?
                .accepted()
                .map(|score| Detection {
                    rect: *p,
                    score,
                    label: label.to_string(),
                }))
        })
        .collect();
    let dets: Vec<Detection> = scored?.into_iter().flatten().collect();
    Ok(nms(dets, nms_iou))
}

/// Greedy non-maximum suppression: keep the highest-scoring box, drop all
/// boxes overlapping it with IoU strictly above the threshold, repeat.
/// Output is sorted by descending score with pairwise IoU <= threshold.
pub fn nms(mut dets: Vec<Detection>, iou_threshold: f64) -> Vec<Detection> {
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut kept: Vec<Detection> = Vec::with_capacity(dets.len());
    'outer: for d in dets {
        for k in &kept {
            if k.rect.iou(&d.rect) > iou_threshold {
                continue 'outer;
            }
        }
        kept.push(d);
    }
    kept
}

/// Deterministic sliding-window lattice clipped to the image: for each
/// (scale, aspect ratio) pair, windows of size
/// `(scale*sqrt(ratio), scale/sqrt(ratio))` at the given stride.
pub fn propose_grid(
    image_w: usize,
    image_h: usize,
    scales: &[u32],
    ratios: &[f64],
    stride: usize,
) -> Vec<PixelRect> {
    let mut out = Vec::new();
    for &scale in scales {
        for &ratio in ratios {
            let w = (scale as f64 * ratio.sqrt()).round() as usize;
            let h = (scale as f64 / ratio.sqrt()).round() as usize;
            if w == 0 || h == 0 || w > image_w || h > image_h {
                continue;
            }
            let mut y = 0;
            while y + h <= image_h {
                let mut x = 0;
                while x + w <= image_w {
                    out.push(PixelRect::new(
                        x as i64,
                        y as i64,
                        (x + w) as i64,
                        (y + h) as i64,
                    ));
                    x += stride;
                }
                y += stride;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// One training image: its feature grids, ground-truth boxes, and candidate
/// windows.
#[derive(Debug)]
pub struct TrainImage {
    pub grids: FamilyGrids,
    pub gt_boxes: Vec<PixelRect>,
    pub proposals: Vec<PixelRect>,
}

#[derive(Debug, Clone)]
pub struct TrainParams {
    pub stages: usize,
    pub weaks_per_stage: usize,
    pub seed: u64,
    pub normalizer: Normalizer,
    /// Proposals with IoU >= this against a ground truth become positives
    /// (ground-truth boxes themselves are always positives).
    pub positive_iou: f64,
    /// At most this many proposal positives per ground-truth box, taken by
    /// descending IoU; bounds the sample count on dense proposal lattices.
    pub positives_per_gt: usize,
    /// Windows with max IoU < this are usable as negatives.
    pub negative_iou: f64,
    /// Fraction of training positives each stage must keep.
    pub survive_fraction: f64,
    /// Negatives collected per stage, roughly this many per positive.
    pub negatives_per_positive: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            stages: 4,
            weaks_per_stage: 64,
            seed: 1,
            normalizer: Normalizer::L0,
            positive_iou: 0.6,
            positives_per_gt: 2,
            negative_iou: 0.3,
            survive_fraction: 0.99,
            negatives_per_positive: 2.0,
        }
    }
}

/// Per-round training diagnostics, one entry per boosting round.
#[derive(Debug, Clone, Default)]
pub struct StageTrace {
    /// Mean exponential loss of the ensemble after each round.
    pub exp_loss: Vec<f64>,
    /// Weighted squared error of the selected stump, under the weights it
    /// was selected with.
    pub stump_se: Vec<f64>,
    /// Weighted squared error of the best constant predictor under the same
    /// weights.
    pub const_se: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainTrace {
    pub stages: Vec<StageTrace>,
    pub positives: usize,
    pub negatives_per_stage: Vec<usize>,
}

struct Sample {
    image: usize,
    window: PixelRect,
    y: f64,
}

/// Train a cascade on labeled images. Positives are ground-truth boxes plus
/// high-IoU proposals; stage-1 negatives are sampled low-IoU proposals and
/// later stages re-mine false positives of the cascade so far.
pub fn train_cascade(
    images: &[TrainImage],
    pool: &[RegionletConfig],
    params: &TrainParams,
) -> Result<(Cascade, TrainTrace), DetectorError> {
    if pool.is_empty() {
        return Err(DetectorError::EmptyPool);
    }
    let mut rng = Rng::new(params.seed).fork(0xb005);

    let mut positives: Vec<Sample> = Vec::new();
    for (ii, img) in images.iter().enumerate() {
        let mut taken: Vec<PixelRect> = Vec::new();
        for gt in &img.gt_boxes {
            positives.push(Sample {
                image: ii,
                window: *gt,
                y: 1.0,
            });
            taken.push(*gt);
            // top proposals by IoU against this ground truth
            let mut over: Vec<(f64, &PixelRect)> = img
                .proposals
                .iter()
                .map(|p| (gt.iou(p), p))
                .filter(|(o, p)| *o >= params.positive_iou && !taken.contains(p))
                .collect();
            over.sort_by(|a, b| b.0.total_cmp(&a.0));
            for (_, p) in over.into_iter().take(params.positives_per_gt) {
                positives.push(Sample {
                    image: ii,
                    window: *p,
                    y: 1.0,
                });
                taken.push(*p);
            }
        }
    }
    if positives.is_empty() {
        return Err(DetectorError::NoPositives);
    }
    let neg_quota =
        ((positives.len() as f64 * params.negatives_per_positive).ceil() as usize).max(1);

    // all (image, proposal) pairs usable as negatives, in a seeded shuffle
    let mut neg_candidates: Vec<(usize, PixelRect)> = Vec::new();
    for (ii, img) in images.iter().enumerate() {
        for p in &img.proposals {
            if img
                .gt_boxes
                .iter()
                .all(|gt| gt.iou(p) < params.negative_iou)
            {
                neg_candidates.push((ii, *p));
            }
        }
    }
    if neg_candidates.is_empty() {
        return Err(DetectorError::NoNegatives);
    }
    shuffle(&mut neg_candidates, &mut rng);

    let mut cascade = Cascade {
        stages: Vec::new(),
        pool: pool.to_vec(),
        normalizer: params.normalizer,
        meta: TrainMeta {
            seed: params.seed,
            pool_size: pool.len(),
        },
    };
    let mut trace = TrainTrace {
        positives: positives.len(),
        ..TrainTrace::default()
    };

    let mut cursor = 0usize; // walk through shuffled negatives for top-ups
    for _stage_index in 0..params.stages {
        // -- assemble this stage's negatives --------------------------------
        let mut negatives: Vec<Sample> = Vec::new();
        if !cascade.stages.is_empty() {
            // mine false positives of the cascade so far
            'mine: for (ii, img) in images.iter().enumerate() {
                for p in &img.proposals {
                    if negatives.len() >= neg_quota {
                        break 'mine;
                    }
                    if img
                        .gt_boxes
                        .iter()
                        .all(|gt| gt.iou(p) < params.negative_iou)
                        && score_window(&cascade, &img.grids, p)?.accepted().is_some()
                    {
                        negatives.push(Sample {
                            image: ii,
                            window: *p,
                            y: -1.0,
                        });
                    }
                }
            }
        }
        // top up with (still unrejected, for later stages) random low-IoU windows
        let mut walked = 0;
        while negatives.len() < neg_quota && walked < neg_candidates.len() {
            let (ii, p) = neg_candidates[cursor];
            cursor = (cursor + 1) % neg_candidates.len();
            walked += 1;
            let usable = cascade.stages.is_empty()
                || score_window(&cascade, &images[ii].grids, &p)?
                    .accepted()
                    .is_some();
            if usable {
                negatives.push(Sample {
                    image: ii,
                    window: p,
                    y: -1.0,
                });
            }
        }
        if negatives.is_empty() {
            // nothing left to reject: the cascade already separates training data
            break;
        }
        trace.negatives_per_stage.push(negatives.len());

        let mut samples: Vec<Sample> = std::mem::take(&mut positives);
        let split = samples.len();
        samples.extend(negatives);

        // rejection thresholds act on the cascade-cumulative score, so each
        // positive carries its score from the stages trained so far
        let base_scores: Vec<f32> = samples
            .iter()
            .map(|s| raw_score(&cascade, &images[s.image].grids, &s.window))
            .collect::<Result<_, _>>()?;

        let (stage, stage_trace) = train_stage(images, &samples, &base_scores, pool, params)?;
        cascade.stages.push(stage);
        trace.stages.push(stage_trace);

        // restore positives for the next stage
        positives = samples.drain(..split).collect();
    }
    cascade.validate()?;
    Ok((cascade, trace))
}

fn shuffle<T>(items: &mut [T], rng: &mut Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Sum of all weak responses, no early exit.
fn raw_score(
    cascade: &Cascade,
    grids: &FamilyGrids,
    window: &PixelRect,
) -> Result<f32, DetectorError> {
    let mut score = 0.0f32;
    for stage in &cascade.stages {
        for weak in &stage.weaks {
            let cfg = &cascade.pool[weak.config_index];
            let v = region_feature(grids, window, cfg, cascade.normalizer)?;
            score += weak.response(v);
        }
    }
    Ok(score)
}

fn train_stage(
    images: &[TrainImage],
    samples: &[Sample],
    base_scores: &[f32],
    pool: &[RegionletConfig],
    params: &TrainParams,
) -> Result<(CascadeStage, StageTrace), DetectorError> {
    let n = samples.len();

    // feature matrix: one row per config, plus a per-row argsort reused by
    // every round
    type FeatureRow = (Vec<f32>, Vec<u32>);
    let rows: Result<Vec<FeatureRow>, DetectorError> = pool
        .par_iter()
        .map(|cfg| {
            let mut row = Vec::with_capacity(n);
            for s in samples {
                let v = region_feature(&images[s.image].grids, &s.window, cfg, params.normalizer)?;
                row.push(v);
            }
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_by(|&a, &b| row[a as usize].total_cmp(&row[b as usize]));
            Ok((row, order))
        })
        .collect();
    let rows = rows?;

    let mut weights: Vec<f64> = vec![1.0 / n as f64; n];
    let mut margins: Vec<f64> = vec![0.0; n];
    let mut weaks: Vec<WeakClassifier> = Vec::with_capacity(params.weaks_per_stage);
    let mut strace = StageTrace::default();

    for _round in 0..params.weaks_per_stage {
        let total_wy: f64 = samples.iter().zip(&weights).map(|(s, w)| w * s.y).sum();
        let const_gain = total_wy * total_wy; // sum of weights is 1

        // best stump over all configs; ties resolve to the smaller config
        // index so parallel reduction stays deterministic
        let best = rows
            .par_iter()
            .enumerate()
            .map(|(ci, (row, order))| {
                fit_stump(row, order, samples, &weights, total_wy).map(|(gain, theta, a, b)| {
                    Candidate {
                        gain,
                        config: ci,
                        threshold: theta,
                        left: a,
                        right: b,
                    }
                })
            })
            .reduce(
                || None,
                |x, y| match (x, y) {
                    (None, c) | (c, None) => c,
                    (Some(a), Some(b)) => Some(if b.beats(&a) { b } else { a }),
                },
            );

        let Some(cand) = best else {
            break; // no stump splits the data at all
        };
        if cand.gain <= const_gain {
            break; // nothing beats the constant predictor; stop the stage
        }
        strace.stump_se.push(1.0 - cand.gain);
        strace.const_se.push(1.0 - const_gain);

        let weak = WeakClassifier {
            config_index: cand.config,
            threshold: cand.threshold,
            left_value: cand.left,
            right_value: cand.right,
        };
        let row = &rows[cand.config].0;
        let mut z = 0.0f64;
        for i in 0..n {
            let h = weak.response(row[i]) as f64;
            margins[i] += samples[i].y * h;
            weights[i] *= (-samples[i].y * h).exp();
            z += weights[i];
        }
        for w in weights.iter_mut() {
            *w /= z;
        }
        debug_assert!(weights.iter().all(|w| *w > 0.0));
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        weaks.push(weak);

        let exp_loss = margins.iter().map(|m| (-m).exp()).sum::<f64>() / n as f64;
        strace.exp_loss.push(exp_loss);
    }

    if weaks.is_empty() {
        // degenerate stage; accept everything
        return Ok((
            CascadeStage {
                weaks: vec![WeakClassifier {
                    config_index: 0,
                    threshold: f32::INFINITY,
                    left_value: 0.0,
                    right_value: 0.0,
                }],
                reject_threshold: f32::NEG_INFINITY,
            },
            strace,
        ));
    }

    // place the rejection threshold so the configured fraction of positives
    // survives: threshold at the (1 - fraction) quantile of their cumulative
    // (previous stages + this stage) scores
    let mut pos_scores: Vec<f32> = samples
        .iter()
        .zip(&margins)
        .zip(base_scores)
        .filter(|((s, _), _)| s.y > 0.0)
        .map(|((s, m), base)| base + (s.y * m) as f32) // y=+1: margin is the stage score
        .collect();
    pos_scores.sort_by(f32::total_cmp);
    let drop = ((1.0 - params.survive_fraction) * pos_scores.len() as f64).floor() as usize;
    let reject_threshold = pos_scores[drop.min(pos_scores.len() - 1)];

    Ok((
        CascadeStage {
            weaks,
            reject_threshold,
        },
        strace,
    ))
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    config: usize,
    threshold: f32,
    left: f32,
    right: f32,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        self.gain > other.gain || (self.gain == other.gain && self.config < other.config)
    }
}

/// Best threshold split of one feature row under the current weights.
/// Returns `(gain, threshold, left_value, right_value)`; gain is
/// `SL^2/WL + SR^2/WR`, to be compared against the constant's `S^2`.
/// Candidate thresholds are midpoints between consecutive distinct sorted
/// values; ties in gain keep the smaller threshold.
fn fit_stump(
    row: &[f32],
    order: &[u32],
    samples: &[Sample],
    weights: &[f64],
    total_wy: f64,
) -> Option<(f64, f32, f32, f32)> {
    let n = row.len();
    let mut wl = 0.0f64;
    let mut syl = 0.0f64;
    let mut best: Option<(f64, f32, f32, f32)> = None;
    for k in 0..n - 1 {
        let i = order[k] as usize;
        wl += weights[i];
        syl += weights[i] * samples[i].y;
        let v0 = row[i];
        let v1 = row[order[k + 1] as usize];
        if v0 == v1 {
            continue;
        }
        let wr = 1.0 - wl;
        if wl <= 0.0 || wr <= 0.0 {
            continue;
        }
        let syr = total_wy - syl;
        let gain = syl * syl / wl + syr * syr / wr;
        let improves = match &best {
            None => true,
            Some((g, ..)) => gain > *g, // strict: earlier (smaller) thresholds win ties
        };
        if improves {
            let theta = (v0 + v1) / 2.0;
            best = Some((gain, theta, (syl / wl) as f32, (syr / wr) as f32));
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Cascade wire format
// ---------------------------------------------------------------------------
//
// Versioned text; weaks reference the separately serialized config pool by
// index. Floats use Rust's shortest round-trip formatting, so reloading is
// exact.

pub fn cascade_to_text(cascade: &Cascade) -> String {
    let mut out = String::new();
    out.push_str("DNPC 1\n");
    out.push_str(&format!("normalizer {}\n", cascade.normalizer));
    out.push_str(&format!("seed {}\n", cascade.meta.seed));
    out.push_str(&format!("pool-size {}\n", cascade.meta.pool_size));
    for stage in &cascade.stages {
        out.push_str(&format!(
            "stage {} {}\n",
            stage.reject_threshold,
            stage.weaks.len()
        ));
        for w in &stage.weaks {
            out.push_str(&format!(
                "weak {} {} {} {}\n",
                w.config_index, w.threshold, w.left_value, w.right_value
            ));
        }
    }
    out
}

pub fn cascade_from_text(text: &str, pool: Vec<RegionletConfig>) -> Result<Cascade, DetectorError> {
    let mut lines = text.lines().enumerate();
    let err = |line: usize, msg: &str| DetectorError::Parse {
        line: line + 1,
        msg: msg.to_string(),
    };
    let (ln, header) = lines.next().ok_or_else(|| err(0, "empty file"))?;
    if header.trim() != "DNPC 1" {
        return Err(err(ln, "bad magic/version (expected `DNPC 1`)"));
    }
    let mut normalizer = Normalizer::L0;
    let mut seed = 0u64;
    let mut pool_size = pool.len();
    let mut stages: Vec<CascadeStage> = Vec::new();
    for (ln, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[0] {
            "normalizer" => {
                normalizer = fields
                    .get(1)
                    .ok_or_else(|| err(ln, "missing normalizer"))?
                    .parse()
                    .map_err(|e: String| err(ln, &e))?;
            }
            "seed" => {
                seed = fields
                    .get(1)
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| err(ln, "bad seed"))?;
            }
            "pool-size" => {
                pool_size = fields
                    .get(1)
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| err(ln, "bad pool-size"))?;
            }
            "stage" => {
                if fields.len() != 3 {
                    return Err(err(ln, "expected: stage <reject_threshold> <n_weaks>"));
                }
                let thr: f32 = fields[1].parse().map_err(|_| err(ln, "bad threshold"))?;
                stages.push(CascadeStage {
                    weaks: Vec::new(),
                    reject_threshold: thr,
                });
            }
            "weak" => {
                if fields.len() != 5 {
                    return Err(err(ln, "expected: weak <config> <theta> <left> <right>"));
                }
                let stage = stages
                    .last_mut()
                    .ok_or_else(|| err(ln, "weak before any stage"))?;
                let config_index: usize =
                    fields[1].parse().map_err(|_| err(ln, "bad config index"))?;
                let threshold: f32 = fields[2].parse().map_err(|_| err(ln, "bad threshold"))?;
                let left_value: f32 = fields[3].parse().map_err(|_| err(ln, "bad left value"))?;
                let right_value: f32 = fields[4].parse().map_err(|_| err(ln, "bad right value"))?;
                stage.weaks.push(WeakClassifier {
                    config_index,
                    threshold,
                    left_value,
                    right_value,
                });
            }
            other => return Err(err(ln, &format!("unknown record {other:?}"))),
        }
    }
    if pool_size != pool.len() {
        return Err(DetectorError::Parse {
            line: 0,
            msg: format!("cascade expects pool of {pool_size}, got {}", pool.len()),
        });
    }
    let cascade = Cascade {
        stages,
        pool,
        normalizer,
        meta: TrainMeta { seed, pool_size },
    };
    cascade.validate()?;
    Ok(cascade)
}

pub fn save_cascade(path: &Path, cascade: &Cascade) -> Result<(), DetectorError> {
    std::fs::write(path, cascade_to_text(cascade))?;
    Ok(())
}

pub fn load_cascade(path: &Path, pool: Vec<RegionletConfig>) -> Result<Cascade, DetectorError> {
    cascade_from_text(&std::fs::read_to_string(path)?, pool)
}
