//! Regular grids of D-dimensional feature vectors with pixel geometry: the
//! common output of every dense feature family.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum GridError {
    #[error("query ({x}, {y}) is not a grid point")]
    OffGrid { x: i64, y: i64 },
    #[error("grid file: bad magic")]
    BadMagic,
    #[error("grid file: unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("grid file: truncated")]
    Truncated,
    #[error("grid data length {len} != cols*rows*dim = {expected}")]
    BadLength { len: usize, expected: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Feature point (u, v) sits at pixel `(origin.0 + u*stride, origin.1 + v*stride)`.
/// Data is point-major: vector of point (u, v) starts at `((v*cols)+u)*dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub origin: (i64, i64),
    pub stride: u32,
    pub cols: usize,
    pub rows: usize,
    pub dim: usize,
    data: Vec<f32>,
}

impl FeatureGrid {
    pub fn zeros(
        origin: (i64, i64),
        stride: u32,
        cols: usize,
        rows: usize,
        dim: usize,
    ) -> FeatureGrid {
        FeatureGrid {
            origin,
            stride,
            cols,
            rows,
            dim,
            data: vec![0.0; cols * rows * dim],
        }
    }

    pub fn from_vec(
        origin: (i64, i64),
        stride: u32,
        cols: usize,
        rows: usize,
        dim: usize,
        data: Vec<f32>,
    ) -> Result<FeatureGrid, GridError> {
        if data.len() != cols * rows * dim {
            return Err(GridError::BadLength {
                len: data.len(),
                expected: cols * rows * dim,
            });
        }
        Ok(FeatureGrid {
            origin,
            stride,
            cols,
            rows,
            dim,
            data,
        })
    }

    #[inline]
    pub fn point(&self, u: usize, v: usize) -> &[f32] {
        let start = (v * self.cols + u) * self.dim;
        &self.data[start..start + self.dim]
    }

    #[inline]
    pub fn point_mut(&mut self, u: usize, v: usize) -> &mut [f32] {
        let start = (v * self.cols + u) * self.dim;
        &mut self.data[start..start + self.dim]
    }

    /// Pixel coordinate of point (u, v).
    #[inline]
    pub fn coord(&self, u: usize, v: usize) -> (i64, i64) {
        (
            self.origin.0 + u as i64 * self.stride as i64,
            self.origin.1 + v as i64 * self.stride as i64,
        )
    }

    /// Stored vector at an exact pixel coordinate; off-grid queries error,
    /// there is no interpolation.
    pub fn feature_vector_at(&self, x: i64, y: i64) -> Result<&[f32], GridError> {
        let dx = x - self.origin.0;
        let dy = y - self.origin.1;
        let s = self.stride as i64;
        if dx < 0 || dy < 0 || dx % s != 0 || dy % s != 0 {
            return Err(GridError::OffGrid { x, y });
        }
        let (u, v) = ((dx / s) as usize, (dy / s) as usize);
        if u >= self.cols || v >= self.rows {
            return Err(GridError::OffGrid { x, y });
        }
        Ok(self.point(u, v))
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    // -- binary format ------------------------------------------------------
    //
    // magic "DNPG" | version u32 | origin x,y (2 x i32) | stride i32
    // cols, rows, dim (3 x u32) | f32 data, little-endian

    pub fn save(&self, path: &Path) -> Result<(), GridError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(GRID_MAGIC)?;
        f.write_all(&GRID_VERSION.to_le_bytes())?;
        f.write_all(&(self.origin.0 as i32).to_le_bytes())?;
        f.write_all(&(self.origin.1 as i32).to_le_bytes())?;
        f.write_all(&(self.stride as i32).to_le_bytes())?;
        for dim in [self.cols, self.rows, self.dim] {
            f.write_all(&(dim as u32).to_le_bytes())?;
        }
        for v in &self.data {
            f.write_all(&v.to_le_bytes())?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<FeatureGrid, GridError> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        read_exact(&mut f, &mut magic)?;
        if &magic != GRID_MAGIC {
            return Err(GridError::BadMagic);
        }
        let version = read_u32(&mut f)?;
        if version != GRID_VERSION {
            return Err(GridError::UnsupportedVersion(version));
        }
        let ox = read_u32(&mut f)? as i32 as i64;
        let oy = read_u32(&mut f)? as i32 as i64;
        let stride = read_u32(&mut f)? as i32;
        let cols = read_u32(&mut f)? as usize;
        let rows = read_u32(&mut f)? as usize;
        let dim = read_u32(&mut f)? as usize;
        let mut bytes = vec![0u8; cols * rows * dim * 4];
        read_exact(&mut f, &mut bytes)?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        FeatureGrid::from_vec((ox, oy), stride as u32, cols, rows, dim, data)
    }
}

const GRID_MAGIC: &[u8; 4] = b"DNPG";
const GRID_VERSION: u32 = 1;

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), GridError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            GridError::Truncated
        } else {
            GridError::Io(e)
        }
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, GridError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}
