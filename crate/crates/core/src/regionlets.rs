//! Regionlet pooling: turn a feature grid plus a (region, regionlets,
//! family, dimension) configuration into the single number a weak classifier
//! consumes.
//!
//! A regionlet is averaged over the grid points whose centers fall inside it
//! (half-open test), the averaged vector is normalized, and the configured
//! dimension is max-pooled among the config's regionlets. Region and
//! regionlet coordinates are normalized to the detection window, so one
//! configuration applies to windows of any size and aspect ratio.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::grid::FeatureGrid;

#[derive(Error, Debug)]
pub enum RegionletError {
    #[error("degenerate window: zero pixel area")]
    DegenerateWindow,
    #[error("family {0} has no grid")]
    MissingFamily(Family),
    #[error("dimension {dim} out of range for grid with {max} dims")]
    DimOutOfRange { dim: usize, max: usize },
    #[error("config pool parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Families and rectangles
// ---------------------------------------------------------------------------

/// A dense feature family: neural patterns of one layer, or HOG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Dnp(usize),
    Hog,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Dnp(layer) => write!(f, "dnp{layer}"),
            Family::Hog => write!(f, "hog"),
        }
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "hog" {
            return Ok(Family::Hog);
        }
        if let Some(layer) = s.strip_prefix("dnp") {
            return layer
                .parse()
                .map(Family::Dnp)
                .map_err(|_| format!("bad family token {s:?}"));
        }
        Err(format!("bad family token {s:?}"))
    }
}

/// Rectangle in window-normalized coordinates, `[0, 1]` per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitRect {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

impl UnitRect {
    pub fn new(left: f64, top: f64, right: f64, bottom: f64) -> UnitRect {
        UnitRect {
            left,
            top,
            right,
            bottom,
        }
    }

    pub fn valid(&self) -> bool {
        self.left < self.right
            && self.top < self.bottom
            && self.left >= 0.0
            && self.top >= 0.0
            && self.right <= 1.0
            && self.bottom <= 1.0
    }

    pub fn contains(&self, other: &UnitRect) -> bool {
        other.left >= self.left
            && other.top >= self.top
            && other.right <= self.right
            && other.bottom <= self.bottom
    }
}

/// Half-open pixel rectangle `[left, right) x [top, bottom)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelRect {
    pub left: i64,
    pub top: i64,
    pub right: i64,
    pub bottom: i64,
}

impl PixelRect {
    pub fn new(left: i64, top: i64, right: i64, bottom: i64) -> PixelRect {
        PixelRect {
            left,
            top,
            right,
            bottom,
        }
    }

    pub fn width(&self) -> i64 {
        self.right - self.left
    }

    pub fn height(&self) -> i64 {
        self.bottom - self.top
    }

    pub fn area(&self) -> i64 {
        self.width().max(0) * self.height().max(0)
    }

    pub fn is_valid(&self) -> bool {
        self.right > self.left && self.bottom > self.top
    }

    /// Intersection-over-union of two boxes.
    pub fn iou(&self, other: &PixelRect) -> f64 {
        let iw = (self.right.min(other.right) - self.left.max(other.left)).max(0);
        let ih = (self.bottom.min(other.bottom) - self.top.max(other.top)).max(0);
        let inter = iw * ih;
        if inter == 0 {
            return 0.0;
        }
        let union = self.area() + other.area() - inter;
        inter as f64 / union as f64
    }
}

// ---------------------------------------------------------------------------
// Configurations
// ---------------------------------------------------------------------------

/// One 1-D feature descriptor: a region, its regionlets, and which dimension
/// of which family to read.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionletConfig {
    pub family: Family,
    pub dim: usize,
    pub region: UnitRect,
    pub regionlets: Vec<UnitRect>,
}

impl RegionletConfig {
    pub fn is_valid(&self) -> bool {
        !self.regionlets.is_empty()
            && self.region.valid()
            && self
                .regionlets
                .iter()
                .all(|r| r.valid() && self.region.contains(r))
    }
}

/// How pooled regionlet vectors are normalized before max-pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalizer {
    /// Divide by the count of nonzero entries.
    L0,
    /// Divide by the sum of absolute values.
    L1,
}

impl fmt::Display for Normalizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Normalizer::L0 => write!(f, "l0"),
            Normalizer::L1 => write!(f, "l1"),
        }
    }
}

impl FromStr for Normalizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "l0" => Ok(Normalizer::L0),
            "l1" => Ok(Normalizer::L1),
            other => Err(format!("bad normalizer {other:?}")),
        }
    }
}

/// The per-image feature grids a detector works from, keyed by family.
#[derive(Debug, Clone, Default)]
pub struct FamilyGrids {
    grids: Vec<(Family, FeatureGrid)>,
}

impl FamilyGrids {
    pub fn new() -> FamilyGrids {
        FamilyGrids { grids: Vec::new() }
    }

    pub fn insert(&mut self, family: Family, grid: FeatureGrid) {
        debug_assert!(self.get(family).is_none(), "duplicate family grid");
        self.grids.push((family, grid));
    }

    pub fn get(&self, family: Family) -> Option<&FeatureGrid> {
        self.grids
            .iter()
            .find(|(f, _)| *f == family)
            .map(|(_, g)| g)
    }

    pub fn families(&self) -> impl Iterator<Item = Family> + '_ {
        self.grids.iter().map(|(f, _)| *f)
    }
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

/// Average the grid vectors whose point centers fall inside regionlet `r`
/// mapped into `window` pixels. Zero covered points yield the zero vector.
pub fn pool_regionlet(
    grid: &FeatureGrid,
    window: &PixelRect,
    r: &UnitRect,
) -> Result<Vec<f32>, RegionletError> {
    if window.width() <= 0 || window.height() <= 0 {
        return Err(RegionletError::DegenerateWindow);
    }
    let wl = window.left as f64;
    let wt = window.top as f64;
    let ww = window.width() as f64;
    let wh = window.height() as f64;
    let rl = wl + r.left * ww;
    let rr = wl + r.right * ww;
    let rt = wt + r.top * wh;
    let rb = wt + r.bottom * wh;

    let mut out = vec![0.0f32; grid.dim];
    let mut count = 0u32;
    let s = grid.stride as f64;
    let x0 = grid.origin.0 as f64;
    let y0 = grid.origin.1 as f64;
    // conservative index range, then the exact center-in-rect test
    let u_lo = (((rl - x0) / s).floor() as i64 - 1).max(0) as usize;
    let u_hi = ((((rr - x0) / s).ceil() as i64) + 1)
        .min(grid.cols as i64)
        .max(0) as usize;
    let v_lo = (((rt - y0) / s).floor() as i64 - 1).max(0) as usize;
    let v_hi = ((((rb - y0) / s).ceil() as i64) + 1)
        .min(grid.rows as i64)
        .max(0) as usize;
    for v in v_lo..v_hi {
        let y = y0 + v as f64 * s;
        if y < rt || y >= rb {
            continue;
        }
        for u in u_lo..u_hi {
            let x = x0 + u as f64 * s;
            if x < rl || x >= rr {
                continue;
            }
            for (acc, val) in out.iter_mut().zip(grid.point(u, v)) {
                *acc += val;
            }
            count += 1;
        }
    }
    if count > 0 {
        let n = count as f32;
        for v in out.iter_mut() {
            *v /= n;
        }
    }
    Ok(out)
}

/// L0 reading: divide by the number of nonzero entries; the zero vector maps
/// to itself. L1 divides by the absolute sum instead.
pub fn normalize(v: &mut [f32], normalizer: Normalizer) {
    let denom = match normalizer {
        Normalizer::L0 => v.iter().filter(|x| **x != 0.0).count() as f32,
        Normalizer::L1 => v.iter().map(|x| x.abs()).sum::<f32>(),
    };
    if denom > 0.0 {
        for x in v.iter_mut() {
            *x /= denom;
        }
    }
}

pub fn normalize_l0(v: &[f32]) -> Vec<f32> {
    let mut out = v.to_vec();
    normalize(&mut out, Normalizer::L0);
    out
}

/// The 1-D feature of one configuration on one window: pool each regionlet,
/// normalize, then take the max of the configured dimension.
pub fn region_feature(
    grids: &FamilyGrids,
    window: &PixelRect,
    cfg: &RegionletConfig,
    normalizer: Normalizer,
) -> Result<f32, RegionletError> {
    let grid = grids
        .get(cfg.family)
        .ok_or(RegionletError::MissingFamily(cfg.family))?;
    if cfg.dim >= grid.dim {
        return Err(RegionletError::DimOutOfRange {
            dim: cfg.dim,
            max: grid.dim,
        });
    }
    let mut best = f32::NEG_INFINITY;
    for r in &cfg.regionlets {
        let mut pooled = pool_regionlet(grid, window, r)?;
        normalize(&mut pooled, normalizer);
        best = best.max(pooled[cfg.dim]);
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Configuration sampling
// ---------------------------------------------------------------------------

/// Uniformly sample the family x dimension x regionlets configuration space:
/// region corners on a 1/16 lattice of the unit window, 1..=k_max regionlets
/// uniform inside the region, dimension uniform over the family's dims. The
/// same seed always produces the same pool. Corners are quantized to the
/// 6-decimal wire resolution so a saved and reloaded pool is identical to
/// the in-memory one.
pub fn sample_configurations(
    seed: u64,
    count: usize,
    families: &[(Family, usize)],
    k_max: usize,
) -> Vec<RegionletConfig> {
    assert!(!families.is_empty() && k_max >= 1);
    let mut rng = crate::rng::Rng::new(seed).fork(0x7e91);
    let mut pool = Vec::with_capacity(count);
    while pool.len() < count {
        let (family, dims) = families[rng.below(families.len() as u64) as usize];
        let dim = rng.below(dims as u64) as usize;
        let (l, r) = distinct_pair(&mut rng, 16);
        let (t, b) = distinct_pair(&mut rng, 16);
        let region = UnitRect::new(
            l as f64 / 16.0,
            t as f64 / 16.0,
            r as f64 / 16.0,
            b as f64 / 16.0,
        );
        let k = 1 + rng.below(k_max as u64) as usize;
        let mut regionlets = Vec::with_capacity(k);
        for _ in 0..k {
            let (rl, rr) = ordered_span(&mut rng, region.left, region.right);
            let (rt, rb) = ordered_span(&mut rng, region.top, region.bottom);
            regionlets.push(UnitRect::new(rl, rt, rr, rb));
        }
        let cfg = RegionletConfig {
            family,
            dim,
            region,
            regionlets,
        };
        debug_assert!(cfg.is_valid());
        pool.push(cfg);
    }
    pool
}

fn distinct_pair(rng: &mut crate::rng::Rng, lattice: u64) -> (u64, u64) {
    loop {
        let a = rng.below(lattice + 1);
        let b = rng.below(lattice + 1);
        if a < b {
            return (a, b);
        }
        if b < a {
            return (b, a);
        }
    }
}

fn ordered_span(rng: &mut crate::rng::Rng, lo: f64, hi: f64) -> (f64, f64) {
    loop {
        let a = quantize(rng.range_f64(lo, hi));
        let b = quantize(rng.range_f64(lo, hi));
        if a < b {
            return (a, b);
        }
        if b < a {
            return (b, a);
        }
    }
}

fn quantize(v: f64) -> f64 {
    format!("{v:.6}").parse().unwrap()
}

// ---------------------------------------------------------------------------
// Pool wire format
// ---------------------------------------------------------------------------
//
// One config per line, 6-decimal fixed-point coordinates:
// family dim R.l R.t R.r R.b K r1.l r1.t r1.r r1.b ...

pub fn pool_to_text(pool: &[RegionletConfig]) -> String {
    let mut out = String::new();
    for c in pool {
        out.push_str(&format!(
            "{} {} {:.6} {:.6} {:.6} {:.6} {}",
            c.family,
            c.dim,
            c.region.left,
            c.region.top,
            c.region.right,
            c.region.bottom,
            c.regionlets.len()
        ));
        for r in &c.regionlets {
            out.push_str(&format!(
                " {:.6} {:.6} {:.6} {:.6}",
                r.left, r.top, r.right, r.bottom
            ));
        }
        out.push('\n');
    }
    out
}

pub fn pool_from_text(text: &str) -> Result<Vec<RegionletConfig>, RegionletError> {
    let mut pool = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| RegionletError::Parse {
            line: ln + 1,
            msg: msg.to_string(),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 7 {
            return Err(err("too few fields"));
        }
        let family: Family = fields[0].parse().map_err(|e: String| err(&e))?;
        let dim: usize = fields[1].parse().map_err(|_| err("bad dim"))?;
        let nums: Result<Vec<f64>, _> = fields[2..6].iter().map(|f| f.parse()).collect();
        let nums = nums.map_err(|_| err("bad region coordinate"))?;
        let region = UnitRect::new(nums[0], nums[1], nums[2], nums[3]);
        let k: usize = fields[6].parse().map_err(|_| err("bad regionlet count"))?;
        if fields.len() != 7 + 4 * k {
            return Err(err("regionlet field count mismatch"));
        }
        let mut regionlets = Vec::with_capacity(k);
        for i in 0..k {
            let base = 7 + 4 * i;
            let vals: Result<Vec<f64>, _> =
                fields[base..base + 4].iter().map(|f| f.parse()).collect();
            let vals = vals.map_err(|_| err("bad regionlet coordinate"))?;
            regionlets.push(UnitRect::new(vals[0], vals[1], vals[2], vals[3]));
        }
        let cfg = RegionletConfig {
            family,
            dim,
            region,
            regionlets,
        };
        if !cfg.is_valid() {
            return Err(err("config violates invariants"));
        }
        pool.push(cfg);
    }
    Ok(pool)
}

pub fn save_pool(path: &Path, pool: &[RegionletConfig]) -> Result<(), RegionletError> {
    std::fs::write(path, pool_to_text(pool))?;
    Ok(())
}

pub fn load_pool(path: &Path) -> Result<Vec<RegionletConfig>, RegionletError> {
    pool_from_text(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn grid_with(
        points: &[((usize, usize), Vec<f32>)],
        cols: usize,
        rows: usize,
        dim: usize,
    ) -> FeatureGrid {
        let mut g = FeatureGrid::zeros((0, 0), 8, cols, rows, dim);
        for ((u, v), vec) in points {
            g.point_mut(*u, *v).copy_from_slice(vec);
        }
        g
    }

    #[test]
    fn normalize_l0_examples() {
        assert_eq!(normalize_l0(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(normalize_l0(&[0.0, 3.0, 0.0]), vec![0.0, 3.0, 0.0]);
        assert_eq!(
            normalize_l0(&[2.0, 4.0, 0.0, 0.0]),
            vec![1.0, 2.0, 0.0, 0.0]
        );
    }

    #[test]
    fn normalize_l1_alternative() {
        let mut v = vec![2.0, 6.0, 0.0];
        normalize(&mut v, Normalizer::L1);
        assert_eq!(v, vec![0.25, 0.75, 0.0]);
    }

    #[test]
    fn pool_single_point() {
        let g = grid_with(&[((1, 1), vec![5.0, 7.0])], 4, 4, 2);
        // grid stride 8, origin (0,0): point (1,1) sits at (8,8)
        let window = PixelRect::new(0, 0, 32, 32);
        let r = UnitRect::new(0.2, 0.2, 0.3, 0.3); // pixels [6.4, 9.6): only (8,8)
        let out = pool_regionlet(&g, &window, &r).unwrap();
        assert_eq!(out, vec![5.0, 7.0]);
    }

    #[test]
    fn pool_constant_grid() {
        let mut g = FeatureGrid::zeros((0, 0), 8, 5, 5, 3);
        for v in g.data_mut() {
            *v = 2.5;
        }
        let window = PixelRect::new(0, 0, 40, 40);
        let r = UnitRect::new(0.1, 0.1, 0.9, 0.9);
        let out = pool_regionlet(&g, &window, &r).unwrap();
        assert!(out.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn pool_two_points_averages() {
        let g = grid_with(&[((0, 0), vec![1.0]), ((1, 0), vec![3.0])], 2, 1, 1);
        let window = PixelRect::new(0, 0, 16, 8);
        let r = UnitRect::new(0.0, 0.0, 1.0, 1.0);
        let out = pool_regionlet(&g, &window, &r).unwrap();
        assert_eq!(out, vec![2.0]);
    }

    #[test]
    fn pool_empty_regionlet_is_zero() {
        let g = grid_with(&[((0, 0), vec![9.0])], 1, 1, 1);
        // window far away from the only grid point
        let window = PixelRect::new(100, 100, 120, 120);
        let r = UnitRect::new(0.0, 0.0, 1.0, 1.0);
        assert_eq!(pool_regionlet(&g, &window, &r).unwrap(), vec![0.0]);
    }

    #[test]
    fn degenerate_window_errors() {
        let g = grid_with(&[((0, 0), vec![1.0])], 1, 1, 1);
        let window = PixelRect::new(5, 5, 5, 9);
        let r = UnitRect::new(0.0, 0.0, 1.0, 1.0);
        assert!(matches!(
            pool_regionlet(&g, &window, &r),
            Err(RegionletError::DegenerateWindow)
        ));
    }

    #[test]
    fn pool_matches_brute_force_enumeration() {
        let mut rng = Rng::new(404);
        let mut g = FeatureGrid::zeros((13, 5), 8, 12, 9, 4);
        for v in g.data_mut() {
            *v = rng.range_f64(-1.0, 1.0) as f32;
        }
        for _ in 0..1000 {
            let wl = rng.range_u64(0, 80) as i64;
            let wt = rng.range_u64(0, 60) as i64;
            let window = PixelRect::new(
                wl,
                wt,
                wl + rng.range_u64(4, 60) as i64,
                wt + rng.range_u64(4, 50) as i64,
            );
            let a = rng.unit_f64();
            let b = rng.unit_f64();
            let c = rng.unit_f64();
            let d = rng.unit_f64();
            let r = UnitRect::new(a.min(b), c.min(d), a.max(b) + 1e-9, c.max(d) + 1e-9);
            let got = pool_regionlet(&g, &window, &r).unwrap();

            // independent enumeration over every grid point
            let rl = window.left as f64 + r.left * window.width() as f64;
            let rr = window.left as f64 + r.right * window.width() as f64;
            let rt = window.top as f64 + r.top * window.height() as f64;
            let rb = window.top as f64 + r.bottom * window.height() as f64;
            let mut want = vec![0.0f32; 4];
            let mut n = 0;
            for v in 0..g.rows {
                for u in 0..g.cols {
                    let (x, y) = g.coord(u, v);
                    if (x as f64) >= rl && (x as f64) < rr && (y as f64) >= rt && (y as f64) < rb {
                        for (acc, val) in want.iter_mut().zip(g.point(u, v)) {
                            *acc += val;
                        }
                        n += 1;
                    }
                }
            }
            if n > 0 {
                for w in want.iter_mut() {
                    *w /= n as f32;
                }
            }
            assert_eq!(got, want);
        }
    }

    #[test]
    fn region_feature_max_pools() {
        let g = grid_with(&[((0, 0), vec![0.2]), ((1, 0), vec![0.7])], 2, 1, 1);
        let mut grids = FamilyGrids::new();
        grids.insert(Family::Hog, g);
        let window = PixelRect::new(0, 0, 16, 8);
        // one regionlet per point
        let cfg = RegionletConfig {
            family: Family::Hog,
            dim: 0,
            region: UnitRect::new(0.0, 0.0, 1.0, 1.0),
            regionlets: vec![
                UnitRect::new(0.0, 0.0, 0.4, 1.0),
                UnitRect::new(0.4, 0.0, 1.0, 1.0),
            ],
        };
        let v = region_feature(&grids, &window, &cfg, Normalizer::L0).unwrap();
        assert!((v - 0.7).abs() < 1e-6);

        // K=1 equals the single regionlet's value; duplicates change nothing
        let single = RegionletConfig {
            regionlets: vec![UnitRect::new(0.0, 0.0, 0.4, 1.0)],
            ..cfg.clone()
        };
        let dup = RegionletConfig {
            regionlets: vec![UnitRect::new(0.0, 0.0, 0.4, 1.0); 3],
            ..cfg.clone()
        };
        let sv = region_feature(&grids, &window, &single, Normalizer::L0).unwrap();
        let dv = region_feature(&grids, &window, &dup, Normalizer::L0).unwrap();
        assert_eq!(sv, dv);
        assert!((sv - 0.2).abs() < 1e-6);
    }

    #[test]
    fn region_feature_missing_family() {
        let grids = FamilyGrids::new();
        let cfg = RegionletConfig {
            family: Family::Dnp(5),
            dim: 0,
            region: UnitRect::new(0.0, 0.0, 1.0, 1.0),
            regionlets: vec![UnitRect::new(0.0, 0.0, 1.0, 1.0)],
        };
        assert!(matches!(
            region_feature(&grids, &PixelRect::new(0, 0, 8, 8), &cfg, Normalizer::L0),
            Err(RegionletError::MissingFamily(_))
        ));
    }

    #[test]
    fn scale_covariance_and_argmax_invariance() {
        let mut rng = Rng::new(88);
        let mut g = FeatureGrid::zeros((0, 0), 8, 10, 10, 6);
        for v in g.data_mut() {
            *v = rng.range_f64(0.0, 1.0) as f32;
        }
        let mut scaled = g.clone();
        for v in scaled.data_mut() {
            *v *= 3.5;
        }
        let mut grids = FamilyGrids::new();
        grids.insert(Family::Hog, g);
        let mut grids_scaled = FamilyGrids::new();
        grids_scaled.insert(Family::Hog, scaled);

        let pool = sample_configurations(5, 64, &[(Family::Hog, 6)], 3);
        let window = PixelRect::new(4, 4, 70, 60);
        let vals: Vec<f32> = pool
            .iter()
            .map(|c| region_feature(&grids, &window, c, Normalizer::L0).unwrap())
            .collect();
        let scaled_vals: Vec<f32> = pool
            .iter()
            .map(|c| region_feature(&grids_scaled, &window, c, Normalizer::L0).unwrap())
            .collect();
        for (a, b) in vals.iter().zip(&scaled_vals) {
            assert!((b - a * 3.5).abs() <= 1e-5 * a.abs().max(1.0), "{a} {b}");
        }
        let argmax = |v: &[f32]| {
            v.iter()
                .enumerate()
                .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
                .unwrap()
                .0
        };
        assert_eq!(argmax(&vals), argmax(&scaled_vals));
    }

    #[test]
    fn sampling_is_deterministic_and_valid() {
        let fams = [(Family::Dnp(5), 32), (Family::Hog, 36)];
        let a = sample_configurations(9, 500, &fams, 3);
        let b = sample_configurations(9, 500, &fams, 3);
        assert_eq!(a, b);
        let c = sample_configurations(10, 500, &fams, 3);
        assert_ne!(a, c);

        let single = sample_configurations(1, 1, &fams, 1);
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].regionlets.len(), 1);

        let big = sample_configurations(3, 10_000, &fams, 3);
        for cfg in &big {
            assert!(cfg.is_valid());
            let dmax = if cfg.family == Family::Hog { 36 } else { 32 };
            assert!(cfg.dim < dmax);
            assert!(cfg.regionlets.len() <= 3);
        }
    }

    #[test]
    fn pool_text_round_trip_exact() {
        let fams = [(Family::Dnp(5), 32), (Family::Hog, 36)];
        let pool = sample_configurations(17, 200, &fams, 3);
        let text = pool_to_text(&pool);
        let back = pool_from_text(&text).unwrap();
        assert_eq!(pool, back);
    }

    #[test]
    fn pool_parse_rejects_garbage() {
        assert!(pool_from_text("hog 0 0 0 1\n").is_err());
        assert!(pool_from_text("wat 0 0.0 0.0 1.0 1.0 1 0.0 0.0 1.0 1.0\n").is_err());
        assert!(pool_from_text("hog 0 0.5 0.0 0.4 1.0 1 0.0 0.0 1.0 1.0\n").is_err());
        // left >= right
    }
}
