//! Histogram-of-oriented-gradients feature family, emitted on the same
//! `FeatureGrid` shape as the dense neural patterns so the pooling and
//! boosting layers treat both uniformly.
//!
//! Fixed recipe: 8x8-pixel cells, 9 unsigned orientation bins over 180
//! degrees with hard magnitude voting, 2x2-cell blocks normalized by
//! clipped L2 (clip 0.2, renormalize). One grid point per block, stride 8,
//! 36 dims.

use crate::grid::FeatureGrid;
use crate::image::Image;

pub const HOG_CELL: usize = 8;
pub const HOG_BINS: usize = 9;
pub const HOG_DIM: usize = 4 * HOG_BINS;

const CLIP: f32 = 0.2;
const EPS: f32 = 1e-5;

/// Dense HOG over the whole image. Trailing pixels that do not fill an 8x8
/// cell are ignored. Returns an empty grid (0 cols/rows) when the image is
/// smaller than 2x2 cells.
pub fn hog_extract(image: &Image) -> FeatureGrid {
    let cells_x = image.width / HOG_CELL;
    let cells_y = image.height / HOG_CELL;
    if cells_x < 2 || cells_y < 2 {
        return FeatureGrid::zeros(
            (HOG_CELL as i64, HOG_CELL as i64),
            HOG_CELL as u32,
            0,
            0,
            HOG_DIM,
        );
    }

    // per-cell orientation histograms
    let mut hist = vec![0.0f32; cells_x * cells_y * HOG_BINS];
    let w = image.width;
    let h = image.height;
    for y in 0..cells_y * HOG_CELL {
        for x in 0..cells_x * HOG_CELL {
            // central differences with clamped borders; constant offsets cancel
            let xm = image.luma(x.saturating_sub(1), y);
            let xp = image.luma((x + 1).min(w - 1), y);
            let ym = image.luma(x, y.saturating_sub(1));
            let yp = image.luma(x, (y + 1).min(h - 1));
            let gx = xp - xm;
            let gy = yp - ym;
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx);
            if angle < 0.0 {
                angle += std::f32::consts::PI;
            }
            if angle >= std::f32::consts::PI {
                angle = 0.0;
            }
            let bin = ((angle / std::f32::consts::PI * HOG_BINS as f32) as usize).min(HOG_BINS - 1);
            let cell = (y / HOG_CELL) * cells_x + x / HOG_CELL;
            hist[cell * HOG_BINS + bin] += mag;
        }
    }

    // 2x2 blocks, one grid point per block, centered on the shared cell corner
    let cols = cells_x - 1;
    let rows = cells_y - 1;
    let mut grid = FeatureGrid::zeros(
        (HOG_CELL as i64, HOG_CELL as i64),
        HOG_CELL as u32,
        cols,
        rows,
        HOG_DIM,
    );
    for bv in 0..rows {
        for bu in 0..cols {
            let out = grid.point_mut(bu, bv);
            for (q, (dy, dx)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
                let cell = (bv + dy) * cells_x + (bu + dx);
                out[q * HOG_BINS..(q + 1) * HOG_BINS]
                    .copy_from_slice(&hist[cell * HOG_BINS..(cell + 1) * HOG_BINS]);
            }
            normalize_block(out);
        }
    }
    grid
}

fn normalize_block(v: &mut [f32]) {
    let norm = (v.iter().map(|x| x * x).sum::<f32>() + EPS * EPS).sqrt();
    for x in v.iter_mut() {
        *x = (*x / norm).min(CLIP);
    }
    let norm = (v.iter().map(|x| x * x).sum::<f32>() + EPS * EPS).sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn constant_image_gives_zero_features() {
        let mut img = Image::new(64, 64, 1);
        img.data.fill(137);
        let g = hog_extract(&img);
        assert_eq!((g.cols, g.rows, g.dim), (7, 7, 36));
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grid_shape_for_64x64() {
        let img = Image::new(64, 64, 1);
        let g = hog_extract(&img);
        assert_eq!((g.cols, g.rows), (7, 7));
        assert_eq!(g.stride, 8);
        assert_eq!(g.origin, (8, 8));
    }

    #[test]
    fn vertical_edge_energy_lands_in_horizontal_bin() {
        // left half dark, right half bright: gradients point along +x
        let mut img = Image::new(64, 64, 1);
        for y in 0..64 {
            for x in 32..64 {
                img.set(x, y, 0, 200);
            }
        }
        let g = hog_extract(&img);
        let mut bins = [0.0f32; HOG_BINS];
        for v in 0..g.rows {
            for u in 0..g.cols {
                let p = g.point(u, v);
                for q in 0..4 {
                    for b in 0..HOG_BINS {
                        bins[b] += p[q * HOG_BINS + b];
                    }
                }
            }
        }
        let total: f32 = bins.iter().sum();
        assert!(total > 0.0);
        assert!(bins[0] / total > 0.99, "bin0 share {}", bins[0] / total);
    }

    #[test]
    fn values_bounded_and_offset_invariant() {
        let mut rng = Rng::new(31);
        let mut img = Image::new(72, 48, 1);
        for v in img.data.iter_mut() {
            *v = 60 + rng.below(100) as u8;
        }
        let g = hog_extract(&img);
        assert!(g.data().iter().all(|&v| (0.0..=1.0).contains(&v)));

        let mut shifted = img.clone();
        for v in shifted.data.iter_mut() {
            *v += 50;
        }
        let g2 = hog_extract(&shifted);
        assert_eq!(g.data(), g2.data());
    }

    #[test]
    fn too_small_image_yields_empty_grid() {
        let img = Image::new(12, 12, 1);
        let g = hog_extract(&img);
        assert_eq!((g.cols, g.rows), (0, 0));
    }
}
