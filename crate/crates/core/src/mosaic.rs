//! Division-of-focal-plane sensor simulation.
//!
//! A snapshot polarization camera covers each 2×2 superpixel with four
//! micro-polarizers at distinct analyzer angles, trading spatial resolution
//! for single-exposure capture. This module mosaics a four-image stack onto
//! such a sensor, reconstructs full-resolution stacks by per-channel bilinear
//! interpolation, and applies a simple shot + read noise model with optional
//! quantization. Noise acts on the mosaiced frame — the sensor plane — not on
//! reconstructed channels.

use crate::error::{Error, Result};
use crate::image::RadianceImage;
use crate::stokes::PolarizationStack;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use std::fmt;
use std::str::FromStr;

/// One of the four canonical analyzer angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyzerAngle {
    A0,
    A45,
    A90,
    A135,
}

impl AnalyzerAngle {
    pub fn degrees(self) -> u32 {
        match self {
            Self::A0 => 0,
            Self::A45 => 45,
            Self::A90 => 90,
            Self::A135 => 135,
        }
    }

    pub fn from_degrees(deg: u32) -> Result<Self> {
        match deg {
            0 => Ok(Self::A0),
            45 => Ok(Self::A45),
            90 => Ok(Self::A90),
            135 => Ok(Self::A135),
            other => Err(Error::Precondition(format!(
                "analyzer angle must be one of 0/45/90/135, got {other}"
            ))),
        }
    }

    /// Index of this angle's image within a stack's canonical ordering.
    fn stack_index(self) -> usize {
        match self {
            Self::A0 => 0,
            Self::A45 => 1,
            Self::A90 => 2,
            Self::A135 => 3,
        }
    }
}

/// 2×2 micro-polarizer layout, row-major within the superpixel. Every angle
/// appears exactly once.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MosaicPattern {
    layout: [[AnalyzerAngle; 2]; 2],
}

impl MosaicPattern {
    pub fn new(layout: [[AnalyzerAngle; 2]; 2]) -> Result<Self> {
        let mut seen = [false; 4];
        for row in &layout {
            for angle in row {
                let idx = angle.stack_index();
                if seen[idx] {
                    return Err(Error::Precondition(format!(
                        "pattern repeats analyzer angle {}°",
                        angle.degrees()
                    )));
                }
                seen[idx] = true;
            }
        }
        Ok(Self { layout })
    }

    /// Angle at superpixel cell `(row, col)`, each in `{0, 1}`.
    pub fn angle_at(&self, row: usize, col: usize) -> AnalyzerAngle {
        self.layout[row % 2][col % 2]
    }

    /// Position `(row, col)` of the given angle within the superpixel.
    pub fn position_of(&self, angle: AnalyzerAngle) -> (usize, usize) {
        for (r, row) in self.layout.iter().enumerate() {
            for (c, a) in row.iter().enumerate() {
                if *a == angle {
                    return (r, c);
                }
            }
        }
        unreachable!("pattern invariant guarantees every angle is present")
    }
}

impl Default for MosaicPattern {
    /// The layout of common commercial focal-plane sensors:
    /// 90° and 45° in the top row, 135° and 0° in the bottom row.
    fn default() -> Self {
        Self {
            layout: [
                [AnalyzerAngle::A90, AnalyzerAngle::A45],
                [AnalyzerAngle::A135, AnalyzerAngle::A0],
            ],
        }
    }
}

impl fmt::Display for MosaicPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{}",
            self.layout[0][0].degrees(),
            self.layout[0][1].degrees(),
            self.layout[1][0].degrees(),
            self.layout[1][1].degrees()
        )
    }
}

impl FromStr for MosaicPattern {
    type Err = Error;

    /// Parses a row-major `"a,b,c,d"` list of the four angles in degrees.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::Precondition(format!(
                "pattern must list four angles, got {:?}",
                s
            )));
        }
        let mut angles = [AnalyzerAngle::A0; 4];
        for (slot, part) in angles.iter_mut().zip(&parts) {
            let deg: u32 = part
                .parse()
                .map_err(|_| Error::Precondition(format!("bad angle {part:?} in pattern")))?;
            *slot = AnalyzerAngle::from_degrees(deg)?;
        }
        Self::new([[angles[0], angles[1]], [angles[2], angles[3]]])
    }
}

/// Single-channel mosaiced sensor frame with even dimensions.
#[derive(Debug, Clone)]
pub struct MosaicFrame {
    width: usize,
    height: usize,
    data: Vec<f64>,
    pattern: MosaicPattern,
}

impl MosaicFrame {
    pub fn new(width: usize, height: usize, data: Vec<f64>, pattern: MosaicPattern) -> Result<Self> {
        if width % 2 != 0 || height % 2 != 0 {
            return Err(Error::Precondition(format!(
                "mosaic dimensions must be even, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "frame holds {} values, expected {width}x{height}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Precondition(format!(
                "frame values must be finite and non-negative, found {v}"
            )));
        }
        Ok(Self { width, height, data, pattern })
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

    pub fn pattern(&self) -> MosaicPattern {
        self.pattern
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Sample bit depth for quantization. `None` leaves values continuous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    B8,
    B12,
    B16,
    #[default]
    None,
}

impl BitDepth {
    pub fn bits(self) -> Option<u32> {
        match self {
            Self::B8 => Some(8),
            Self::B12 => Some(12),
            Self::B16 => Some(16),
            Self::None => None,
        }
    }
}

impl FromStr for BitDepth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "8" => Ok(Self::B8),
            "12" => Ok(Self::B12),
            "16" => Ok(Self::B16),
            "none" => Ok(Self::None),
            other => Err(Error::Precondition(format!(
                "bit depth must be 8, 12, 16 or none, got {other:?}"
            ))),
        }
    }
}

/// Shot + read noise with optional quantization, fully determined by `seed`.
///
/// `shot_gain` is the photon count corresponding to unit intensity (0
/// disables shot noise); `read_sigma` is the standard deviation of additive
/// Gaussian read noise in intensity units.
#[derive(Debug, Clone, Copy)]
pub struct SensorNoiseModel {
    pub read_sigma: f64,
    pub shot_gain: f64,
    pub bit_depth: BitDepth,
    pub seed: u64,
}

impl SensorNoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.read_sigma >= 0.0 && self.read_sigma.is_finite()) {
            return Err(Error::Precondition(format!(
                "read_sigma must be finite and non-negative, got {}",
                self.read_sigma
            )));
        }
        if !(self.shot_gain >= 0.0 && self.shot_gain.is_finite()) {
            return Err(Error::Precondition(format!(
                "shot_gain must be finite and non-negative, got {}",
                self.shot_gain
            )));
        }
        Ok(())
    }
}

/// Samples a stack onto the sensor: each pixel keeps only the analyzer image
/// matching its cell in the 2×2 pattern. Lossless at the sampled positions.
pub fn mosaic(stack: &PolarizationStack, pattern: MosaicPattern) -> Result<MosaicFrame> {
    if stack.channels() != 1 {
        return Err(Error::Precondition(
            "mosaic expects a single-channel stack; reduce to grayscale first".into(),
        ));
    }
    let (w, h) = (stack.width(), stack.height());
    if w % 2 != 0 || h % 2 != 0 {
        return Err(Error::Precondition(format!(
            "mosaic requires even dimensions, got {w}x{h}"
        )));
    }
    let images = stack.images();
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let angle = pattern.angle_at(y, x);
            data.push(images[angle.stack_index()].get(x, y, 0));
        }
    }
    MosaicFrame::new(w, h, data, pattern)
}

/// Reconstructs the four full-resolution analyzer channels from a mosaiced
/// frame by bilinear interpolation over each channel's quarter-resolution
/// sample lattice. Sample positions reproduce the frame bit-exactly; border
/// pixels use clamped (replicated) lattice coordinates.
pub fn demosaic(frame: &MosaicFrame) -> Result<PolarizationStack> {
    let (w, h) = (frame.width(), frame.height());
    let (nx, ny) = (w / 2, h / 2);
    let pattern = frame.pattern();

    let mut channels: Vec<RadianceImage> = Vec::with_capacity(4);
    for angle in [AnalyzerAngle::A0, AnalyzerAngle::A45, AnalyzerAngle::A90, AnalyzerAngle::A135] {
        let (r0, c0) = pattern.position_of(angle);
        // Gather this channel's samples into a quarter-resolution lattice.
        let mut lattice = vec![0.0; nx * ny];
        for sy in 0..ny {
            for sx in 0..nx {
                lattice[sy * nx + sx] = frame.get(2 * sx + c0, 2 * sy + r0);
            }
        }
        // Bilinear interpolation back to full resolution.
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            let fy = (((y as f64) - (r0 as f64)) / 2.0).clamp(0.0, (ny - 1) as f64);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(ny - 1);
            let wy = fy - y0 as f64;
            for x in 0..w {
                let fx = (((x as f64) - (c0 as f64)) / 2.0).clamp(0.0, (nx - 1) as f64);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(nx - 1);
                let wx = fx - x0 as f64;
                let top = lattice[y0 * nx + x0] * (1.0 - wx) + lattice[y0 * nx + x1] * wx;
                let bottom = lattice[y1 * nx + x0] * (1.0 - wx) + lattice[y1 * nx + x1] * wx;
                out[y * w + x] = (top * (1.0 - wy) + bottom * wy).max(0.0);
            }
        }
        channels.push(RadianceImage::new(w, h, 1, out)?);
    }
    let mut it = channels.into_iter();
    PolarizationStack::new(
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
    )
}

/// Applies the noise model. Each pixel consumes an independent, deterministic
/// random stream derived from `(model.seed, pixel index)`, so results are
/// reproducible regardless of evaluation order.
pub fn apply_noise(frame: &MosaicFrame, model: &SensorNoiseModel) -> Result<MosaicFrame> {
    model.validate()?;
    let base = ChaCha8Rng::seed_from_u64(model.seed);
    let data = frame
        .data()
        .iter()
        .enumerate()
        .map(|(px, &v)| {
            let mut rng = base.clone();
            rng.set_stream(px as u64);
            let mut noisy = v;
            if model.shot_gain > 0.0 {
                let lambda = v * model.shot_gain;
                if lambda > 0.0 {
                    let poisson = Poisson::new(lambda).expect("positive finite lambda");
                    noisy = poisson.sample(&mut rng) / model.shot_gain;
                } else {
                    noisy = 0.0;
                }
            }
            if model.read_sigma > 0.0 {
                noisy += model.read_sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
            noisy = noisy.max(0.0);
            if let Some(bits) = model.bit_depth.bits() {
                // The sensor saturates at full scale before digitization.
                noisy = quantize_value(noisy.min(1.0), bits);
            }
            noisy
        })
        .collect();
    MosaicFrame::new(frame.width(), frame.height(), data, frame.pattern())
}

#[inline]
fn quantize_value(v: f64, bits: u32) -> f64 {
    let levels = ((1u64 << bits) - 1) as f64;
    // f64::round ties away from zero, which for non-negative input is
    // exactly round-half-up.
    (v * levels).round() / levels
}

/// Quantizes a frame in `[0,1]` to `2^bits − 1` levels with round-half-up.
pub fn quantize(frame: &MosaicFrame, bit_depth: BitDepth) -> Result<MosaicFrame> {
    let Some(bits) = bit_depth.bits() else {
        return Ok(frame.clone());
    };
    if let Some(v) = frame.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Precondition(format!(
            "quantize requires values in [0,1], found {v}"
        )));
    }
    let data = frame.data().iter().map(|&v| quantize_value(v, bits)).collect();
    MosaicFrame::new(frame.width(), frame.height(), data, frame.pattern())
}
