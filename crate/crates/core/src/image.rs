//! 8-bit images with binary PPM (P6) / PGM (P5) reading and writing, and the
//! fixed preprocessing that turns them into network input tensors.

use std::io::{BufRead, Write};
use std::path::Path;

use thiserror::Error;

use crate::tensor::Tensor;

#[derive(Error, Debug)]
pub enum ImageError {
    #[error("not a binary PGM/PPM file (magic {0:?})")]
    BadMagic(String),
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("unsupported max value {0} (only 255)")]
    BadMaxVal(u32),
    #[error("pixel data truncated")]
    Truncated,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Interleaved 8-bit image, 1 (gray) or 3 (RGB) channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Image {
        assert!(channels == 1 || channels == 3);
        Image {
            width,
            height,
            channels,
            data: vec![0; width * height * channels],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Mean over channels, as f32 in [0, 255].
    #[inline]
    pub fn luma(&self, x: usize, y: usize) -> f32 {
        let base = (y * self.width + x) * self.channels;
        let mut sum = 0.0f32;
        for c in 0..self.channels {
            sum += self.data[base + c] as f32;
        }
        sum / self.channels as f32
    }

    /// Scale to [0, 1] and subtract the fixed 0.5 mean; adapt channel count
    /// by replication (gray to color) or averaging (color to gray). Values
    /// land in [-0.5, 0.5] and zero padding sits at mid-gray.
    pub fn to_input_tensor(&self, wanted_channels: usize) -> Tensor {
        let mut t = Tensor::zeros(wanted_channels, self.height, self.width);
        for c in 0..wanted_channels {
            let plane = t.channel_mut(c);
            for y in 0..self.height {
                for x in 0..self.width {
                    let raw = if self.channels == wanted_channels {
                        self.get(x, y, c) as f32
                    } else if self.channels == 1 {
                        self.get(x, y, 0) as f32
                    } else {
                        self.luma(x, y)
                    };
                    plane[y * self.width + x] = raw / 255.0 - 0.5;
                }
            }
        }
        t
    }

    pub fn load(path: &Path) -> Result<Image, ImageError> {
        let file = std::fs::File::open(path)?;
        let mut reader = std::io::BufReader::new(file);
        read_pnm(&mut reader)
    }

    pub fn save(&self, path: &Path) -> Result<(), ImageError> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        write!(w, "{}\n{} {}\n255\n", magic, self.width, self.height)?;
        w.write_all(&self.data)?;
        w.flush()?;
        Ok(())
    }
}

fn read_pnm<R: BufRead>(r: &mut R) -> Result<Image, ImageError> {
    let magic = next_token(r)?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(ImageError::BadMagic(other.to_string())),
    };
    let width: usize = parse_token(r, "width")?;
    let height: usize = parse_token(r, "height")?;
    let maxval: u32 = parse_token(r, "maxval")?;
    if maxval != 255 {
        return Err(ImageError::BadMaxVal(maxval));
    }
    // Exactly one whitespace byte separates the header from pixel data; the
    // token reader has already consumed it.
    let mut data = vec![0u8; width * height * channels];
    r.read_exact(&mut data).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            ImageError::Truncated
        } else {
            ImageError::Io(e)
        }
    })?;
    Ok(Image {
        width,
        height,
        channels,
        data,
    })
}

/// Next whitespace-delimited token, skipping `#` comment lines, consuming
/// the single whitespace byte that terminates it.
fn next_token<R: BufRead>(r: &mut R) -> Result<String, ImageError> {
    let mut token = Vec::new();
    let mut in_comment = false;
    loop {
        let mut byte = [0u8; 1];
        match r.read(&mut byte)? {
            0 => {
                if token.is_empty() {
                    return Err(ImageError::BadHeader("unexpected end of header".into()));
                }
                break;
            }
            _ => {
                let b = byte[0];
                if in_comment {
                    if b == b'\n' {
                        in_comment = false;
                    }
                    continue;
                }
                if b == b'#' && token.is_empty() {
                    in_comment = true;
                    continue;
                }
                if b.is_ascii_whitespace() {
                    if token.is_empty() {
                        continue;
                    }
                    break;
                }
                token.push(b);
            }
        }
    }
    String::from_utf8(token).map_err(|_| ImageError::BadHeader("non-ascii token".into()))
}

fn parse_token<R: BufRead, T: std::str::FromStr>(r: &mut R, what: &str) -> Result<T, ImageError> {
    next_token(r)?
        .parse()
        .map_err(|_| ImageError::BadHeader(format!("bad {what}")))
}
