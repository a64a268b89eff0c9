//! Grayscale image substrate and binary PGM (P5, maxval 255) I/O.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real-valued, row-major 2-D field with no range constraint
/// (noise residuals, fingerprints, perturbations).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Field {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width * height != data.len() {
            return Err(Error::param(
                "data",
                format!("{} values for a {width}x{height} field", data.len()),
            ));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Grayscale image with pixel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("shape", "width and height must be positive"));
        }
        if width * height != data.len() {
            return Err(Error::param(
                "data",
                format!("{} values for a {width}x{height} image", data.len()),
            ));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param("data", format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self { width, height, data })
    }

    /// Clamps every value into `[0, 1]`; NaN maps to 0.
    pub fn from_clamped(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let data = data
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
            .collect();
        Self::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn to_field(&self) -> Field {
        Field {
            width: self.width,
            height: self.height,
            data: self.data.clone(),
        }
    }

    /// Largest centered square crop. Odd margins drop the extra column/row
    /// on the right/bottom.
    pub fn center_crop_square(&self) -> ImageGrid {
        let side = self.width.min(self.height);
        let x0 = (self.width - side) / 2;
        let y0 = (self.height - side) / 2;
        let mut data = Vec::with_capacity(side * side);
        for y in y0..y0 + side {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x0 + side]);
        }
        ImageGrid {
            width: side,
            height: side,
            data,
        }
    }

    /// `‖self − other‖∞`.
    pub fn linf_distance(&self, other: &ImageGrid) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Parses a binary P5 PGM with maxval 255; pixel `v` becomes `v / 255`.
pub fn parse_pgm(bytes: &[u8]) -> Result<ImageGrid> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Pgm("P5 required".into()));
    }
    let mut pos = 2;
    let mut header = [0usize; 3];
    for slot in &mut header {
        // whitespace and comments between tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Pgm("truncated header".into()));
        }
        *slot = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::Pgm("header value out of range".into()))?;
    }
    let [width, height, maxval] = header;
    if maxval != 255 {
        return Err(Error::Pgm(format!("maxval must be 255, found {maxval}")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Pgm("missing whitespace after header".into()));
    }
    pos += 1;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Pgm("image dimensions overflow".into()))?;
    let raster = &bytes[pos..];
    if raster.len() < n {
        return Err(Error::Pgm(format!(
            "truncated raster: expected {n} bytes, found {}",
            raster.len()
        )));
    }
    let data = raster[..n].iter().map(|&v| f64::from(v) / 255.0).collect();
    ImageGrid::new(width, height, data)
}

/// Encodes as P5 with maxval 255, rounding to the nearest level.
pub fn encode_pgm(img: &ImageGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    out
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes)
}

pub fn write_pgm(img: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}
