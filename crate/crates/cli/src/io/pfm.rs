//! Portable float map (PFM) reader and writer.
//!
//! Layout: an ASCII header of four whitespace-separated tokens — the magic
//! (`Pf` grayscale, `PF` color), width, height, and a scale whose sign gives
//! the byte order (negative = little-endian) — terminated by a single
//! whitespace byte, followed by raw 32-bit floats. File rows run bottom-up;
//! this module stores rows top-down in memory and flips on the way through,
//! so write∘read preserves every bit. Color samples are interleaved.

use std::fs;
use std::path::Path;

use polar_core::error::{Error, Result};
use polar_core::image::{Plane, RadianceImage};

/// Decoded float image, rows top-down, channels interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    /// 1 (`Pf`) or 3 (`PF`).
    pub channels: usize,
    pub data: Vec<f32>,
}

impl PfmImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Precondition(format!(
                "float maps hold 1 or 3 channels, got {channels}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::Precondition("float map dimensions must be positive".into()));
        }
        if data.len() != width * height * channels {
            return Err(Error::Dimension(format!(
                "float map holds {} samples, expected {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn from_plane(plane: &Plane) -> Self {
        Self {
            width: plane.width(),
            height: plane.height(),
            channels: 1,
            data: plane.data().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_plane(&self) -> Result<Plane> {
        if self.channels != 1 {
            return Err(Error::Precondition("expected a single-channel float map".into()));
        }
        Plane::new(self.width, self.height, self.data.iter().map(|&v| v as f64).collect())
    }

    pub fn from_radiance(img: &RadianceImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            channels: img.channels(),
            data: img.data().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_radiance(&self) -> Result<RadianceImage> {
        RadianceImage::new(
            self.width,
            self.height,
            self.channels,
            self.data.iter().map(|&v| v as f64).collect(),
        )
    }
}

fn corrupt(path: &Path, what: &str) -> Error {
    Error::Io(format!("{}: {what}", path.display()))
}

/// Splits the four header tokens off a PFM byte stream; returns the tokens
/// and the offset of the first data byte.
fn parse_header(bytes: &[u8]) -> Option<([String; 4], usize)> {
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos == start {
            return None;
        }
        tokens.push(String::from_utf8(bytes[start..pos].to_vec()).ok()?);
    }
    // Exactly one whitespace byte separates the scale from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return None;
    }
    Some((tokens.try_into().expect("collected four tokens"), pos + 1))
}

pub fn read_pfm(path: &Path) -> Result<PfmImage> {
    let bytes =
        fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let ([magic, w, h, scale], data_start) =
        parse_header(&bytes).ok_or_else(|| corrupt(path, "malformed PFM header"))?;
    let channels = match magic.as_str() {
        "Pf" => 1,
        "PF" => 3,
        _ => return Err(corrupt(path, "PFM magic must be \"Pf\" or \"PF\"")),
    };
    let width: usize = w.parse().map_err(|_| corrupt(path, "bad PFM width"))?;
    let height: usize = h.parse().map_err(|_| corrupt(path, "bad PFM height"))?;
    let scale: f32 = scale.parse().map_err(|_| corrupt(path, "bad PFM scale"))?;
    if width == 0 || height == 0 || scale == 0.0 || !scale.is_finite() {
        return Err(corrupt(path, "PFM dimensions and scale must be non-zero"));
    }
    let little_endian = scale < 0.0;
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels * 4))
        .ok_or_else(|| corrupt(path, "PFM dimensions overflow"))?;
    let raster = &bytes[data_start..];
    if raster.len() != expected {
        return Err(corrupt(path, "PFM raster length does not match the header"));
    }
    let row_samples = width * channels;
    let mut data = vec![0f32; width * height * channels];
    for file_row in 0..height {
        let mem_row = height - 1 - file_row; // file order is bottom-up
        for s in 0..row_samples {
            let at = (file_row * row_samples + s) * 4;
            let raw: [u8; 4] = raster[at..at + 4].try_into().expect("bounds checked");
            data[mem_row * row_samples + s] =
                if little_endian { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        }
    }
    PfmImage::new(width, height, channels, data)
}

/// Writes little-endian (`scale = -1.0`).
pub fn write_pfm(path: &Path, img: &PfmImage) -> Result<()> {
    let magic = if img.channels == 1 { "Pf" } else { "PF" };
    let mut bytes = format!("{magic}\n{} {}\n-1.0\n", img.width, img.height).into_bytes();
    let row_samples = img.width * img.channels;
    for file_row in 0..img.height {
        let mem_row = img.height - 1 - file_row;
        for s in 0..row_samples {
            bytes.extend_from_slice(&img.data[mem_row * row_samples + s].to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
