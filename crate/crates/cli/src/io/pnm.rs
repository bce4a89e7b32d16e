//! Binary PGM (`P5`) and PPM (`P6`) reader and writer for quantized exports.
//!
//! Header tokens (magic, width, height, maxval) may be separated by any
//! whitespace and `#` comments; a single whitespace byte then precedes the
//! raster. Samples are one byte up to maxval 255, otherwise two bytes
//! big-endian, per the format.

use std::fs;
use std::path::Path;

use polar_core::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnmKind {
    /// `P5`, one sample per pixel.
    Gray,
    /// `P6`, three samples per pixel.
    Rgb,
}

impl PnmKind {
    fn channels(self) -> usize {
        match self {
            Self::Gray => 1,
            Self::Rgb => 3,
        }
    }

    fn magic(self) -> &'static str {
        match self {
            Self::Gray => "P5",
            Self::Rgb => "P6",
        }
    }
}

/// Decoded quantized image, rows top-down, channels interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PnmImage {
    pub kind: PnmKind,
    pub width: usize,
    pub height: usize,
    /// 255 or 65535.
    pub maxval: u16,
    pub samples: Vec<u16>,
}

impl PnmImage {
    pub fn new(
        kind: PnmKind,
        width: usize,
        height: usize,
        maxval: u16,
        samples: Vec<u16>,
    ) -> Result<Self> {
        if maxval != 255 && maxval != 65535 {
            return Err(Error::Precondition(format!(
                "quantized exports use maxval 255 or 65535, got {maxval}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::Precondition("image dimensions must be positive".into()));
        }
        if samples.len() != width * height * kind.channels() {
            return Err(Error::Dimension(format!(
                "image holds {} samples, expected {width}x{height}x{}",
                samples.len(),
                kind.channels()
            )));
        }
        if let Some(v) = samples.iter().find(|v| **v > maxval) {
            return Err(Error::Precondition(format!("sample {v} exceeds maxval {maxval}")));
        }
        Ok(Self { kind, width, height, maxval, samples })
    }
}

fn corrupt(path: &Path, what: &str) -> Error {
    Error::Io(format!("{}: {what}", path.display()))
}

/// Reads header tokens, skipping whitespace and `#`-to-end-of-line comments.
fn parse_header(bytes: &[u8]) -> Option<([String; 4], usize)> {
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < 4 {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
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
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return None;
    }
    Some((tokens.try_into().expect("collected four tokens"), pos + 1))
}

pub fn read_pnm(path: &Path) -> Result<PnmImage> {
    let bytes =
        fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let ([magic, w, h, maxval], data_start) =
        parse_header(&bytes).ok_or_else(|| corrupt(path, "malformed PNM header"))?;
    let kind = match magic.as_str() {
        "P5" => PnmKind::Gray,
        "P6" => PnmKind::Rgb,
        _ => return Err(corrupt(path, "PNM magic must be \"P5\" or \"P6\"")),
    };
    let width: usize = w.parse().map_err(|_| corrupt(path, "bad PNM width"))?;
    let height: usize = h.parse().map_err(|_| corrupt(path, "bad PNM height"))?;
    let maxval: u16 = maxval.parse().map_err(|_| corrupt(path, "bad PNM maxval"))?;
    if maxval != 255 && maxval != 65535 {
        return Err(corrupt(path, "PNM maxval must be 255 or 65535"));
    }
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(kind.channels()))
        .ok_or_else(|| corrupt(path, "PNM dimensions overflow"))?;
    let bytes_per = if maxval > 255 { 2 } else { 1 };
    let raster = &bytes[data_start..];
    if raster.len() != count * bytes_per {
        return Err(corrupt(path, "PNM raster length does not match the header"));
    }
    let samples = if bytes_per == 1 {
        raster.iter().map(|&b| b as u16).collect()
    } else {
        raster.chunks_exact(2).map(|p| u16::from_be_bytes([p[0], p[1]])).collect()
    };
    PnmImage::new(kind, width, height, maxval, samples)
}

pub fn write_pnm(path: &Path, img: &PnmImage) -> Result<()> {
    let mut bytes =
        format!("{}\n{} {}\n{}\n", img.kind.magic(), img.width, img.height, img.maxval)
            .into_bytes();
    if img.maxval > 255 {
        for &s in &img.samples {
            bytes.extend_from_slice(&s.to_be_bytes());
        }
    } else {
        bytes.extend(img.samples.iter().map(|&s| s as u8));
    }
    fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
