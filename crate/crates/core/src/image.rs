//! Pixel containers shared by every stage of the pipeline.
//!
//! Three buffer types cover all needs:
//! * [`RadianceImage`] — non-negative linear radiance, 1 or 3 channels;
//! * [`Plane`] — a single-channel field with no sign restriction (angles,
//!   encoded channels, network activations);
//! * [`Mask`] — per-pixel booleans.
//!
//! All buffers are row-major with the origin at the top-left pixel; a pixel
//! `(x, y)` has `x` growing rightwards and `y` growing downwards.

use crate::error::{Error, Result};

/// Luma weights used whenever a 3-channel image is reduced to grayscale.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Linear radiance samples, nominally in `[0, peak]` with `peak = 1.0` by
/// default. Values are validated to be finite and non-negative on entry.
#[derive(Debug, Clone, PartialEq)]
pub struct RadianceImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl RadianceImage {
    /// Builds an image from row-major data (`channels` interleaved per pixel).
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Precondition(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::Dimension(format!(
                "radiance buffer holds {} values, expected {}x{}x{} = {}",
                data.len(),
                width,
                height,
                channels,
                width * height * channels
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Precondition(format!(
                "radiance values must be finite and non-negative, found {v}"
            )));
        }
        Ok(Self { width, height, channels, data })
    }

    /// All-zero image.
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self::new(width, height, channels, vec![0.0; width * height * channels])
            .expect("zero image is always valid")
    }

    /// Builds a single-channel image by evaluating `f(x, y)`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Number of pixels (independent of channel count).
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, ch: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + ch]
    }

    /// True when `other` has identical width, height and channel count.
    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Reduces to grayscale with the given weights; 1-channel images pass
    /// through unchanged.
    pub fn to_grayscale(&self, weights: [f64; 3]) -> Self {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|px| weights[0] * px[0] + weights[1] * px[1] + weights[2] * px[2])
            .collect();
        Self { width: self.width, height: self.height, channels: 1, data }
    }
}

/// Single-channel scalar field without sign or range restrictions beyond
/// finiteness. Used for AoLP, encoded channels, and intermediate maps.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "plane holds {} values, expected {width}x{height} = {}",
                data.len(),
                width * height
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Precondition(format!("plane values must be finite, found {v}")));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Separable Gaussian blur with replicated borders, truncated at `3σ`.
///
/// Used to produce band-limited test signals and smooth synthetic scenes;
/// not meant to be a calibrated optical model.
pub fn gaussian_blur(img: &RadianceImage, sigma: f64) -> RadianceImage {
    assert!(sigma > 0.0, "blur sigma must be positive");
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|v| *v /= norm);

    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
    // Horizontal pass, then vertical.
    let mut tmp = vec![0.0; w * h * ch];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (ki, kv) in kernel.iter().enumerate() {
                    let sx = clamp(x as isize + ki as isize - radius, w);
                    acc += kv * img.get(sx, y, c);
                }
                tmp[(y * w + x) * ch + c] = acc;
            }
        }
    }
    let mut out = vec![0.0; w * h * ch];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (ki, kv) in kernel.iter().enumerate() {
                    let sy = clamp(y as isize + ki as isize - radius, h);
                    acc += kv * tmp[(sy * w + x) * ch + c];
                }
                out[(y * w + x) * ch + c] = acc.max(0.0);
            }
        }
    }
    RadianceImage::new(w, h, ch, out).expect("blur of valid radiance is valid")
}

/// Per-pixel boolean mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "mask holds {} values, expected {width}x{height} = {}",
                data.len(),
                width * height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    /// Number of `true` pixels.
    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }

    /// Pixel-wise conjunction; shapes must match.
    pub fn and(&self, other: &Self) -> Result<Self> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::Dimension("mask shapes differ".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| *a && *b).collect();
        Self::new(self.width, self.height, data)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radiance_rejects_negative_values() {
        assert!(RadianceImage::new(2, 1, 1, vec![0.5, -0.1]).is_err());
    }

    #[test]
    fn radiance_rejects_non_finite() {
        assert!(RadianceImage::new(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(RadianceImage::new(1, 1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn radiance_rejects_bad_length() {
        assert!(RadianceImage::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(RadianceImage::new(2, 2, 2, vec![0.0; 8]).is_err());
    }

    #[test]
    fn grayscale_uses_luma_weights() {
        let img = RadianceImage::new(1, 1, 3, vec![1.0, 0.5, 0.25]).unwrap();
        let gray = img.to_grayscale(LUMA_WEIGHTS);
        let expected = 0.299 + 0.587 * 0.5 + 0.114 * 0.25;
        assert_eq!(gray.channels(), 1);
        assert!((gray.get(0, 0, 0) - expected).abs() < 1e-15);
    }

    #[test]
    fn mask_and_counts() {
        let a = Mask::new(2, 1, vec![true, false]).unwrap();
        let b = Mask::new(2, 1, vec![true, true]).unwrap();
        let c = a.and(&b).unwrap();
        assert_eq!(c.count(), 1);
        assert!(c.get(0, 0) && !c.get(1, 0));
    }

    #[test]
    fn indexing_is_row_major() {
        let img = RadianceImage::from_fn(3, 2, |x, y| (y * 3 + x) as f64).unwrap();
        assert_eq!(img.get(2, 1, 0), 5.0);
        assert_eq!(img.data()[5], 5.0);
    }
}
