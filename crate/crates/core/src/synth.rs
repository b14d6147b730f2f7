//! Synthetic detection dataset: textured noise backgrounds, bright filled
//! ellipses as targets, dark rectangles and triangles as distractors, with
//! bounding boxes derived from the rendered pixels so annotations are exact
//! by construction. Fully deterministic per seed.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::eval::{save_annotations, EvalError, GroundTruth, GtBox};
use crate::image::{Image, ImageError};
use crate::regionlets::PixelRect;
use crate::rng::Rng;

#[derive(Error, Debug)]
pub enum SynthError {
    #[error("dataset root {0} missing annotations file")]
    MissingAnnotations(PathBuf),
    #[error("manifest entry {id}: image file {path} missing")]
    MissingImage { id: String, path: PathBuf },
    #[error("duplicate image id {0}")]
    DuplicateId(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Knobs of the generator; defaults produce 320x320 images with 1-3 bright
/// elliptical targets over 0-5 darker distractor shapes.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub min_targets: usize,
    pub max_targets: usize,
    pub max_distractors: usize,
    /// Ellipse semi-axis range in pixels.
    pub axis_range: (usize, usize),
    /// Cap on target aspect ratio (long semi-axis over short).
    pub max_aspect: f64,
    pub min_box_area: i64,
    pub label: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            width: 320,
            height: 320,
            min_targets: 1,
            max_targets: 3,
            max_distractors: 5,
            axis_range: (16, 40),
            max_aspect: 1.5,
            min_box_area: 900,
            label: "target".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    /// Image path relative to the split directory.
    pub image: PathBuf,
    pub gt: GroundTruth,
}

/// An on-disk split: `root/<split>/images/*.ppm` plus
/// `root/<split>/annotations.jsonl`.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub split: String,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn split_dir(&self) -> PathBuf {
        self.root.join(&self.split)
    }

    pub fn image_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.split_dir().join(&entry.image)
    }

    pub fn load_image(&self, entry: &ManifestEntry) -> Result<Image, SynthError> {
        Ok(Image::load(&self.image_path(entry))?)
    }
}

/// Render `n` images into `root/<split>/` and return the manifest. The same
/// (seed, n, spec) produces bitwise-identical images and annotations.
pub fn generate_synthetic(
    seed: u64,
    n: usize,
    spec: &SynthSpec,
    root: &Path,
    split: &str,
) -> Result<DatasetManifest, SynthError> {
    let split_dir = root.join(split);
    let images_dir = split_dir.join("images");
    std::fs::create_dir_all(&images_dir)?;

    let base = Rng::new(seed);
    let mut entries = Vec::with_capacity(n);
    let mut gts = Vec::with_capacity(n);
    for index in 0..n {
        let mut rng = base.fork(index as u64);
        let id = format!("img_{index:06}");
        let (image, boxes) = render_image(&mut rng, spec);
        let rel = PathBuf::from("images").join(format!("{id}.ppm"));
        image.save(&split_dir.join(&rel))?;
        let gt = GroundTruth {
            id: id.clone(),
            width: spec.width,
            height: spec.height,
            boxes,
        };
        gts.push(gt.clone());
        entries.push(ManifestEntry { id, image: rel, gt });
    }
    save_annotations(&split_dir.join("annotations.jsonl"), &gts)?;
    Ok(DatasetManifest {
        root: root.to_path_buf(),
        split: split.to_string(),
        entries,
    })
}

/// Read a split back from disk, auditing that files exist and ids are unique.
pub fn load_manifest(root: &Path, split: &str) -> Result<DatasetManifest, SynthError> {
    let split_dir = root.join(split);
    let ann = split_dir.join("annotations.jsonl");
    if !ann.exists() {
        return Err(SynthError::MissingAnnotations(ann));
    }
    let gts = crate::eval::load_annotations(&ann)?;
    let mut seen = std::collections::HashSet::new();
    let mut entries = Vec::with_capacity(gts.len());
    for gt in gts {
        if !seen.insert(gt.id.clone()) {
            return Err(SynthError::DuplicateId(gt.id));
        }
        let rel = PathBuf::from("images").join(format!("{}.ppm", gt.id));
        if !split_dir.join(&rel).exists() {
            return Err(SynthError::MissingImage {
                id: gt.id.clone(),
                path: split_dir.join(&rel),
            });
        }
        entries.push(ManifestEntry {
            id: gt.id.clone(),
            image: rel,
            gt,
        });
    }
    Ok(DatasetManifest {
        root: root.to_path_buf(),
        split: split.to_string(),
        entries,
    })
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

fn render_image(rng: &mut Rng, spec: &SynthSpec) -> (Image, Vec<GtBox>) {
    let mut img = background(rng, spec.width, spec.height);

    // distractors first so targets are never occluded and mask-derived
    // target boxes stay exact
    let n_distract = rng.below(spec.max_distractors as u64 + 1) as usize;
    for _ in 0..n_distract {
        match rng.below(2) {
            0 => draw_rect(&mut img, rng),
            _ => draw_triangle(&mut img, rng),
        }
    }

    let n_targets = rng.range_u64(spec.min_targets as u64, spec.max_targets as u64) as usize;
    let mut boxes: Vec<GtBox> = Vec::new();
    for _ in 0..n_targets {
        for _attempt in 0..24 {
            if let Some(gt) = try_draw_target(&mut img, rng, spec, &boxes) {
                boxes.push(gt);
                break;
            }
        }
    }
    if boxes.is_empty() {
        // min_targets >= 1: force one target on a clear canvas position
        let gt = try_draw_target(&mut img, rng, spec, &[]).expect("empty exclusion list");
        boxes.push(gt);
    }
    (img, boxes)
}

fn background(rng: &mut Rng, w: usize, h: usize) -> Image {
    let mut img = Image::new(w, h, 3);
    // low-frequency waves over per-pixel noise
    let fx = rng.range_f64(0.01, 0.05);
    let fy = rng.range_f64(0.01, 0.05);
    let phase = rng.range_f64(0.0, std::f64::consts::TAU);
    let tint = [
        rng.range_f64(-10.0, 10.0),
        rng.range_f64(-10.0, 10.0),
        rng.range_f64(-10.0, 10.0),
    ];
    for y in 0..h {
        for x in 0..w {
            let wave = 18.0 * ((x as f64 * fx + y as f64 * fy + phase).sin());
            let noise = rng.range_f64(-22.0, 22.0);
            let base = 105.0 + wave + noise;
            for (c, t) in tint.iter().enumerate() {
                img.set(x, y, c, (base + t).clamp(0.0, 255.0) as u8);
            }
        }
    }
    img
}

fn try_draw_target(
    img: &mut Image,
    rng: &mut Rng,
    spec: &SynthSpec,
    existing: &[GtBox],
) -> Option<GtBox> {
    let (amin, amax) = spec.axis_range;
    let a = rng.range_u64(amin as u64, amax as u64) as f64;
    let bmin = (a / spec.max_aspect).ceil().max(amin as f64);
    let bmax = (a * spec.max_aspect).floor().min(amax as f64);
    let b = rng.range_f64(bmin, bmax + 1.0).min(bmax);
    let margin = 3.0;
    let cx = rng.range_f64(a + margin, spec.width as f64 - a - margin);
    let cy = rng.range_f64(b + margin, spec.height as f64 - b - margin);

    // keep targets mostly separate so every annotation is a clean object
    let approx = approx_box(cx, cy, a, b);
    for prev in existing {
        if approx.iou(&prev.rect()) > 0.1 {
            return None;
        }
    }

    // bright warm fill with mild per-pixel shading
    let r0 = rng.range_u64(205, 255) as f64;
    let g0 = rng.range_u64(150, 220) as f64;
    let b0 = rng.range_u64(40, 110) as f64;
    let mut min_x = i64::MAX;
    let mut min_y = i64::MAX;
    let mut max_x = i64::MIN;
    let mut max_y = i64::MIN;
    let x_lo = (cx - a).floor().max(0.0) as usize;
    let x_hi = ((cx + a).ceil() as usize).min(img.width - 1);
    let y_lo = (cy - b).floor().max(0.0) as usize;
    let y_hi = ((cy + b).ceil() as usize).min(img.height - 1);
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let dx = (x as f64 - cx) / a;
            let dy = (y as f64 - cy) / b;
            if dx * dx + dy * dy > 1.0 {
                continue;
            }
            let shade = 1.0 - 0.15 * (dx * dx + dy * dy);
            img.set(x, y, 0, (r0 * shade) as u8);
            img.set(x, y, 1, (g0 * shade) as u8);
            img.set(x, y, 2, (b0 * shade) as u8);
            min_x = min_x.min(x as i64);
            max_x = max_x.max(x as i64);
            min_y = min_y.min(y as i64);
            max_y = max_y.max(y as i64);
        }
    }
    if min_x > max_x {
        return None; // nothing painted
    }
    let gt = GtBox {
        l: min_x,
        t: min_y,
        r: max_x + 1,
        b: max_y + 1,
        label: spec.label.clone(),
        difficult: false,
    };
    let rect = gt.rect();
    (rect.area() >= spec.min_box_area).then_some(gt)
}

fn draw_rect(img: &mut Image, rng: &mut Rng) {
    let w = rng.range_u64(12, 60) as usize;
    let h = rng.range_u64(12, 60) as usize;
    if w >= img.width || h >= img.height {
        return;
    }
    let x0 = rng.below((img.width - w) as u64) as usize;
    let y0 = rng.below((img.height - h) as u64) as usize;
    let shade = dark_color(rng);
    for y in y0..y0 + h {
        for x in x0..x0 + w {
            put(img, x, y, shade);
        }
    }
}

fn draw_triangle(img: &mut Image, rng: &mut Rng) {
    let size = rng.range_u64(16, 64) as f64;
    let cx = rng.range_f64(size, img.width as f64 - size);
    let cy = rng.range_f64(size, img.height as f64 - size);
    let mut pts = [[0.0f64; 2]; 3];
    for p in pts.iter_mut() {
        let ang = rng.range_f64(0.0, std::f64::consts::TAU);
        let rad = rng.range_f64(size * 0.4, size);
        p[0] = cx + rad * ang.cos();
        p[1] = cy + rad * ang.sin();
    }
    let shade = dark_color(rng);
    let x_lo = pts
        .iter()
        .map(|p| p[0])
        .fold(f64::MAX, f64::min)
        .floor()
        .max(0.0) as usize;
    let x_hi =
        (pts.iter().map(|p| p[0]).fold(f64::MIN, f64::max).ceil() as usize).min(img.width - 1);
    let y_lo = pts
        .iter()
        .map(|p| p[1])
        .fold(f64::MAX, f64::min)
        .floor()
        .max(0.0) as usize;
    let y_hi =
        (pts.iter().map(|p| p[1]).fold(f64::MIN, f64::max).ceil() as usize).min(img.height - 1);
    let edge = |a: [f64; 2], b: [f64; 2], x: f64, y: f64| {
        (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0])
    };
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let (fx, fy) = (x as f64, y as f64);
            let e0 = edge(pts[0], pts[1], fx, fy);
            let e1 = edge(pts[1], pts[2], fx, fy);
            let e2 = edge(pts[2], pts[0], fx, fy);
            if (e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0) || (e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0) {
                put(img, x, y, shade);
            }
        }
    }
}

fn dark_color(rng: &mut Rng) -> [u8; 3] {
    [
        rng.range_u64(15, 85) as u8,
        rng.range_u64(15, 85) as u8,
        rng.range_u64(40, 110) as u8,
    ]
}

fn put(img: &mut Image, x: usize, y: usize, c: [u8; 3]) {
    img.set(x, y, 0, c[0]);
    img.set(x, y, 1, c[1]);
    img.set(x, y, 2, c[2]);
}

fn approx_box(cx: f64, cy: f64, a: f64, b: f64) -> PixelRect {
    PixelRect::new(
        (cx - a).floor() as i64,
        (cy - b).floor() as i64,
        (cx + a).ceil() as i64,
        (cy + b).ceil() as i64,
    )
}
