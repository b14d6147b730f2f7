//! Detection evaluation: ground-truth records, greedy IoU matching, and
//! average precision (all-point interpolation by default, 11-point
//! selectable), plus the CSV wire formats for detections and proposals and
//! the JSON-lines annotation format.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::regionlets::PixelRect;

#[derive(Error, Debug)]
pub enum EvalError {
    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("annotation parse error at line {line}: {msg}")]
    Annotation { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub l: i64,
    pub t: i64,
    pub r: i64,
    pub b: i64,
    pub label: String,
    pub difficult: bool,
}

impl GtBox {
    pub fn rect(&self) -> PixelRect {
        PixelRect::new(self.l, self.t, self.r, self.b)
    }
}

/// One image's annotation record; also the JSON-lines line format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub boxes: Vec<GtBox>,
}

impl GroundTruth {
    pub fn within_bounds(&self) -> bool {
        self.boxes.iter().all(|b| {
            b.l >= 0
                && b.t >= 0
                && b.r <= self.width as i64
                && b.b <= self.height as i64
                && b.r > b.l
                && b.b > b.t
        })
    }
}

pub fn save_annotations(path: &Path, gts: &[GroundTruth]) -> Result<(), EvalError> {
    let mut out = String::new();
    for gt in gts {
        out.push_str(&serde_json::to_string(gt).expect("annotation serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_annotations(path: &Path) -> Result<Vec<GroundTruth>, EvalError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let gt: GroundTruth = serde_json::from_str(line).map_err(|e| EvalError::Annotation {
            line: ln + 1,
            msg: e.to_string(),
        })?;
        out.push(gt);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Detections
// ---------------------------------------------------------------------------

/// A scored box attributed to an image, as evaluated and as serialized.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalDetection {
    pub image_id: String,
    pub rect: PixelRect,
    pub score: f32,
}

/// CSV: `image_id,left,top,right,bottom,score`, one detection per line.
pub fn detections_to_csv(dets: &[EvalDetection]) -> String {
    let mut out = String::from("image_id,left,top,right,bottom,score\n");
    for d in dets {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            d.image_id, d.rect.left, d.rect.top, d.rect.right, d.rect.bottom, d.score
        ));
    }
    out
}

pub fn detections_from_csv(text: &str) -> Result<Vec<EvalDetection>, EvalError> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (ln == 0 && line.starts_with("image_id")) {
            continue;
        }
        let err = |msg: &str| EvalError::Csv {
            line: ln + 1,
            msg: msg.to_string(),
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(err("expected 6 fields"));
        }
        let nums: Result<Vec<i64>, _> = fields[1..5].iter().map(|f| f.trim().parse()).collect();
        let nums = nums.map_err(|_| err("bad coordinate"))?;
        let score: f32 = fields[5].trim().parse().map_err(|_| err("bad score"))?;
        out.push(EvalDetection {
            image_id: fields[0].to_string(),
            rect: PixelRect::new(nums[0], nums[1], nums[2], nums[3]),
            score,
        });
    }
    Ok(out)
}

/// CSV: `image_id,left,top,right,bottom`, one proposal per line.
pub fn proposals_from_csv(text: &str) -> Result<Vec<(String, PixelRect)>, EvalError> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (ln == 0 && line.starts_with("image_id")) {
            continue;
        }
        let err = |msg: &str| EvalError::Csv {
            line: ln + 1,
            msg: msg.to_string(),
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(err("expected 5 fields"));
        }
        let nums: Result<Vec<i64>, _> = fields[1..5].iter().map(|f| f.trim().parse()).collect();
        let nums = nums.map_err(|_| err("bad coordinate"))?;
        out.push((
            fields[0].to_string(),
            PixelRect::new(nums[0], nums[1], nums[2], nums[3]),
        ));
    }
    Ok(out)
}

pub fn proposals_to_csv(props: &[(String, PixelRect)]) -> String {
    let mut out = String::from("image_id,left,top,right,bottom\n");
    for (id, r) in props {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            id, r.left, r.top, r.right, r.bottom
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Average precision
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApMode {
    /// Area under the monotone precision envelope (all-point interpolation).
    AllPoint,
    /// Mean of interpolated precision at recalls 0.0, 0.1, ..., 1.0.
    ElevenPoint,
}

/// Greedy matching at the IoU threshold, one detection per ground truth,
/// difficult ground truths excluded from the positive count. Detections are
/// processed in descending score order regardless of input order.
pub fn average_precision(
    dets: &[EvalDetection],
    gts: &[GroundTruth],
    iou: f64,
    mode: ApMode,
) -> f64 {
    let (recalls, precisions) = pr_curve(dets, gts, iou);
    match mode {
        ApMode::AllPoint => all_point_ap(&recalls, &precisions),
        ApMode::ElevenPoint => eleven_point_ap(&recalls, &precisions),
    }
}

/// Cumulative (recall, precision) after each detection, score-descending.
pub fn pr_curve(dets: &[EvalDetection], gts: &[GroundTruth], iou: f64) -> (Vec<f64>, Vec<f64>) {
    // per image: boxes, difficult flags, matched flags
    type GtState = (Vec<PixelRect>, Vec<bool>, Vec<bool>);
    let mut by_image: HashMap<&str, GtState> = HashMap::new();
    let mut npos = 0usize;
    for gt in gts {
        let rects: Vec<PixelRect> = gt.boxes.iter().map(|b| b.rect()).collect();
        let difficult: Vec<bool> = gt.boxes.iter().map(|b| b.difficult).collect();
        npos += difficult.iter().filter(|d| !**d).count();
        let matched = vec![false; rects.len()];
        by_image.insert(gt.id.as_str(), (rects, difficult, matched));
    }

    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));

    let mut recalls = Vec::with_capacity(dets.len());
    let mut precisions = Vec::with_capacity(dets.len());
    let mut tp = 0usize;
    let mut fp = 0usize;
    for &di in &order {
        let d = &dets[di];
        let mut best_iou = 0.0f64;
        let mut best_gt: Option<usize> = None;
        if let Some((rects, _, _)) = by_image.get(d.image_id.as_str()) {
            for (gi, r) in rects.iter().enumerate() {
                let o = d.rect.iou(r);
                if o > best_iou {
                    best_iou = o;
                    best_gt = Some(gi);
                }
            }
        }
        match best_gt {
            Some(gi) if best_iou >= iou => {
                let (_, difficult, matched) = by_image.get_mut(d.image_id.as_str()).unwrap();
                if difficult[gi] {
                    // matched a difficult object: ignore the detection entirely
                } else if !matched[gi] {
                    matched[gi] = true;
                    tp += 1;
                } else {
                    fp += 1; // duplicate detection of an already-matched object
                }
            }
            _ => fp += 1,
        }
        if npos > 0 {
            recalls.push(tp as f64 / npos as f64);
        } else {
            recalls.push(0.0);
        }
        precisions.push(if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        });
    }
    (recalls, precisions)
}

fn all_point_ap(recalls: &[f64], precisions: &[f64]) -> f64 {
    if recalls.is_empty() {
        return 0.0;
    }
    // monotone precision envelope from the right, integrated over recall steps
    let n = recalls.len();
    let mut envelope = precisions.to_vec();
    for i in (0..n - 1).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for i in 0..n {
        if recalls[i] > prev_r {
            ap += (recalls[i] - prev_r) * envelope[i];
            prev_r = recalls[i];
        }
    }
    ap
}

fn eleven_point_ap(recalls: &[f64], precisions: &[f64]) -> f64 {
    let mut sum = 0.0;
    for k in 0..=10 {
        let r = k as f64 / 10.0;
        let p = recalls
            .iter()
            .zip(precisions)
            .filter(|(rec, _)| **rec >= r - 1e-12)
            .map(|(_, p)| *p)
            .fold(0.0f64, f64::max);
        sum += p;
    }
    sum / 11.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn gt(id: &str, boxes: &[(i64, i64, i64, i64)]) -> GroundTruth {
        GroundTruth {
            id: id.to_string(),
            width: 200,
            height: 200,
            boxes: boxes
                .iter()
                .map(|&(l, t, r, b)| GtBox {
                    l,
                    t,
                    r,
                    b,
                    label: "target".into(),
                    difficult: false,
                })
                .collect(),
        }
    }

    fn d(id: &str, l: i64, t: i64, r: i64, b: i64, score: f32) -> EvalDetection {
        EvalDetection {
            image_id: id.to_string(),
            rect: PixelRect::new(l, t, r, b),
            score,
        }
    }

    #[test]
    fn perfect_detections_score_one() {
        let gts = vec![gt("a", &[(10, 10, 50, 50), (100, 100, 150, 150)])];
        let dets = vec![d("a", 10, 10, 50, 50, 0.9), d("a", 100, 100, 150, 150, 0.8)];
        assert_eq!(average_precision(&dets, &gts, 0.5, ApMode::AllPoint), 1.0);
        assert_eq!(
            average_precision(&dets, &gts, 0.5, ApMode::ElevenPoint),
            1.0
        );
    }

    #[test]
    fn zero_detections_score_zero() {
        let gts = vec![gt("a", &[(10, 10, 50, 50)])];
        assert_eq!(average_precision(&[], &gts, 0.5, ApMode::AllPoint), 0.0);
    }

    #[test]
    fn wrong_above_correct_halves_ap() {
        // 1 GT; a wrong detection outscores the correct one:
        // PR points (0, 0), (1, 1/2); all-point AP = 0.5
        let gts = vec![gt("a", &[(10, 10, 50, 50)])];
        let dets = vec![
            d("a", 120, 120, 160, 160, 0.9), // miss
            d("a", 10, 10, 50, 50, 0.5),     // hit
        ];
        let ap = average_precision(&dets, &gts, 0.5, ApMode::AllPoint);
        assert!((ap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn duplicate_detections_count_as_false_positives() {
        let gts = vec![gt("a", &[(10, 10, 50, 50)])];
        let dets = vec![d("a", 10, 10, 50, 50, 0.9), d("a", 10, 10, 50, 50, 0.8)];
        // first matches; second duplicates -> FP at recall 1
        let ap = average_precision(&dets, &gts, 0.5, ApMode::AllPoint);
        assert!((ap - 1.0).abs() < 1e-12);
        let (r, p) = pr_curve(&dets, &gts, 0.5);
        assert_eq!(r, vec![1.0, 1.0]);
        assert_eq!(p, vec![1.0, 0.5]);
    }

    #[test]
    fn difficult_ground_truth_is_ignored() {
        let mut g = gt("a", &[(10, 10, 50, 50), (100, 100, 140, 140)]);
        g.boxes[1].difficult = true;
        let gts = vec![g];
        // one detection on the difficult box: ignored, not an FP
        let dets = vec![d("a", 100, 100, 140, 140, 0.9), d("a", 10, 10, 50, 50, 0.8)];
        let ap = average_precision(&dets, &gts, 0.5, ApMode::AllPoint);
        assert!((ap - 1.0).abs() < 1e-12, "ap={ap}");
    }

    #[test]
    fn ap_matches_brute_force_integration() {
        // independent quadratic-time reference for the all-point integral
        fn brute_force_ap(recalls: &[f64], precisions: &[f64]) -> f64 {
            let mut ap = 0.0;
            let mut prev = 0.0;
            for i in 0..recalls.len() {
                if recalls[i] <= prev {
                    continue;
                }
                let p_star = (i..recalls.len())
                    .map(|j| precisions[j])
                    .fold(0.0f64, f64::max);
                ap += (recalls[i] - prev) * p_star;
                prev = recalls[i];
            }
            ap
        }
        let mut rng = Rng::new(777);
        for _case in 0..100 {
            let n_gt = rng.range_u64(1, 6) as usize;
            let boxes: Vec<(i64, i64, i64, i64)> = (0..n_gt)
                .map(|_| {
                    let l = rng.range_u64(0, 150) as i64;
                    let t = rng.range_u64(0, 150) as i64;
                    let s = rng.range_u64(10, 40) as i64;
                    (l, t, l + s, t + s)
                })
                .collect();
            let gts = vec![gt("img", &boxes)];
            let n_det = rng.range_u64(0, 20) as usize;
            let dets: Vec<EvalDetection> = (0..n_det)
                .map(|_| {
                    // half the detections jitter a GT box, half are random
                    if rng.below(2) == 0 && !boxes.is_empty() {
                        let (l, t, r, b) = boxes[rng.below(boxes.len() as u64) as usize];
                        let jx = rng.range_u64(0, 10) as i64 - 5;
                        let jy = rng.range_u64(0, 10) as i64 - 5;
                        d("img", l + jx, t + jy, r + jx, b + jy, rng.unit_f64() as f32)
                    } else {
                        let l = rng.range_u64(0, 150) as i64;
                        let t = rng.range_u64(0, 150) as i64;
                        let s = rng.range_u64(10, 40) as i64;
                        d("img", l, t, l + s, t + s, rng.unit_f64() as f32)
                    }
                })
                .collect();
            let (r, p) = pr_curve(&dets, &gts, 0.5);
            let fast = all_point_ap(&r, &p);
            let slow = brute_force_ap(&r, &p);
            assert!((fast - slow).abs() < 1e-9, "{fast} vs {slow}");
        }
    }

    #[test]
    fn detection_csv_round_trip() {
        let dets = vec![
            d("img_000001", 1, 2, 30, 40, 0.125),
            d("img_000002", -3, 0, 10, 10, 1.5e-5),
        ];
        let text = detections_to_csv(&dets);
        let back = detections_from_csv(&text).unwrap();
        assert_eq!(dets, back);
        assert!(detections_from_csv("a,b,c\n").is_err());
    }

    #[test]
    fn proposal_csv_round_trip() {
        let props = vec![
            ("a".to_string(), PixelRect::new(0, 0, 10, 10)),
            ("b".to_string(), PixelRect::new(5, 6, 7, 8)),
        ];
        let text = proposals_to_csv(&props);
        assert_eq!(proposals_from_csv(&text).unwrap(), props);
    }

    #[test]
    fn annotation_jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.jsonl");
        let mut g = gt("img_000000", &[(4, 5, 60, 70)]);
        g.boxes[0].difficult = true;
        let gts = vec![g, gt("img_000001", &[])];
        save_annotations(&path, &gts).unwrap();
        let back = load_annotations(&path).unwrap();
        assert_eq!(gts, back);
    }
}
