//! 8-bit grayscale images and the binary PGM (P5) codec.
//!
//! Coordinates are 1-based: `x` runs over `1..=width`, `y` over `1..=height`.
//! Storage is row-major, so pixel `(x, y)` lives at `(y - 1) * width + (x - 1)`.

use std::io::Write;
use std::path::Path;

use crate::error::{NeptuneError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    values: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, values: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(NeptuneError::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if values.len() != width as usize * height as usize {
            return Err(NeptuneError::InvalidImage(format!(
                "{} values for a {width}x{height} image",
                values.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> u8) -> Result<Self> {
        let mut values = Vec::with_capacity(width as usize * height as usize);
        for y in 1..=height {
            for x in 1..=width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn into_values(self) -> Vec<u8> {
        self.values
    }

    /// Intensity at 1-based `(x, y)`. Panics outside the image.
    pub fn get(&self, x: u32, y: u32) -> u8 {
        assert!((1..=self.width).contains(&x) && (1..=self.height).contains(&y));
        self.values[(y as usize - 1) * self.width as usize + (x as usize - 1)]
    }

    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        assert!((1..=self.width).contains(&x) && (1..=self.height).contains(&y));
        self.values[(y as usize - 1) * self.width as usize + (x as usize - 1)] = value;
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let header = format!("P5\n{} {}\n255\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + self.values.len());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&self.values);
        out
    }

    pub fn from_pgm(data: &[u8]) -> Result<Self> {
        let mut cursor = PgmCursor { data, pos: 0 };
        if cursor.data.len() < 2 || &cursor.data[..2] != b"P5" {
            return Err(NeptuneError::InvalidImage("missing P5 magic".into()));
        }
        cursor.pos = 2;
        let width = cursor.next_number()?;
        let height = cursor.next_number()?;
        let maxval = cursor.next_number()?;
        if maxval == 0 || maxval > 255 {
            return Err(NeptuneError::InvalidImage(format!(
                "unsupported maxval {maxval} (8-bit only)"
            )));
        }
        // exactly one whitespace byte separates the header from the raster
        match cursor.data.get(cursor.pos) {
            Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
            _ => return Err(NeptuneError::InvalidImage("truncated header".into())),
        }
        let needed = width as usize * height as usize;
        let raster = &cursor.data[cursor.pos..];
        if raster.len() < needed {
            return Err(NeptuneError::InvalidImage(format!(
                "raster has {} bytes, expected {needed}",
                raster.len()
            )));
        }
        let mut values = raster[..needed].to_vec();
        if maxval != 255 {
            for v in &mut values {
                *v = ((*v as u32 * 255 + maxval / 2) / maxval).min(255) as u8;
            }
        }
        GrayImage::new(width, height, values)
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| NeptuneError::io(path, e))?;
        file.write_all(&self.to_pgm())
            .map_err(|e| NeptuneError::io(path, e))
    }

    pub fn read_pgm(path: &Path) -> Result<Self> {
        let data = std::fs::read(path).map_err(|e| NeptuneError::io(path, e))?;
        Self::from_pgm(&data).map_err(|e| NeptuneError::BadFrame {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

struct PgmCursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl PgmCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.data.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn next_number(&mut self) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self
            .data
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_digit())
        {
            self.pos += 1;
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| NeptuneError::InvalidImage("malformed header number".into()))
    }
}

/// ITU-R 601 luma, `round(0.299 R + 0.587 G + 0.114 B)` computed in integers.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}
