//! The three interchangeable target representations under comparison.
//!
//! Each representation packs one polarization state into a tensor whose
//! channels all live in `[−1, 1]`, so the diffusion model sees the same
//! numeric range regardless of representation and any quality difference is
//! attributable to the encoding itself:
//!
//! * `PolarImages4` — the four analyzer images tiled into one double-size
//!   2×2 grid channel, mapped `2·I − 1`;
//! * `RawAolpDolp` — the angle stored directly as `Φ/(π/2)` (periodicity
//!   preserved only implicitly) plus `2·P − 1`;
//! * `EncodedAolpDolp` — the sinusoidal channels `(cos 2Φ, sin 2Φ, 2P−1)`,
//!   which are continuous across the ±90° wrap.

use crate::error::{Error, Result};
use crate::image::{Mask, Plane, RadianceImage};
use crate::stokes::{
    decode, decompose_stack, synthesize_stack, wrap_aolp, EncodedPolarMap, PolarStateMap,
    PolarizationStack,
};
use crate::diffusion::tensor::Tensor;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

/// Target encoding for the generative model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetRepresentation {
    /// 2×2 grid of the four analyzer images in one channel (double spatial size).
    PolarImages4,
    /// (Φ, P) stored directly after affine range mapping.
    RawAolpDolp,
    /// (cos 2Φ, sin 2Φ, 2P−1).
    EncodedAolpDolp,
}

impl TargetRepresentation {
    pub const ALL: [TargetRepresentation; 3] =
        [Self::PolarImages4, Self::RawAolpDolp, Self::EncodedAolpDolp];

    /// Channel count of the target tensor.
    pub fn channels(&self) -> usize {
        match self {
            Self::PolarImages4 => 1,
            Self::RawAolpDolp => 2,
            Self::EncodedAolpDolp => 3,
        }
    }

    /// Spatial size of the target relative to the condition patch.
    pub fn spatial_factor(&self) -> usize {
        match self {
            Self::PolarImages4 => 2,
            Self::RawAolpDolp | Self::EncodedAolpDolp => 1,
        }
    }

    /// Stable identifier used in CLI flags, CSV output and checkpoints.
    pub fn label(&self) -> &'static str {
        match self {
            Self::PolarImages4 => "images4",
            Self::RawAolpDolp => "raw",
            Self::EncodedAolpDolp => "encoded",
        }
    }

    /// Byte tag for the checkpoint header.
    pub fn tag(&self) -> u8 {
        match self {
            Self::PolarImages4 => 0,
            Self::RawAolpDolp => 1,
            Self::EncodedAolpDolp => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Self::PolarImages4),
            1 => Ok(Self::RawAolpDolp),
            2 => Ok(Self::EncodedAolpDolp),
            other => Err(Error::Precondition(format!("unknown representation tag {other}"))),
        }
    }
}

impl fmt::Display for TargetRepresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TargetRepresentation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "images4" => Ok(Self::PolarImages4),
            "raw" => Ok(Self::RawAolpDolp),
            "encoded" => Ok(Self::EncodedAolpDolp),
            other => Err(Error::Precondition(format!(
                "unknown representation '{other}' (expected images4, raw or encoded)"
            ))),
        }
    }
}

/// Maps a single-channel intensity patch into the `[−1, 1]` condition tensor
/// (`2·v − 1`) the networks consume. Intended for normalized radiance.
pub fn condition_tensor(s0: &RadianceImage) -> Result<Tensor> {
    if s0.channels() != 1 {
        return Err(Error::Precondition(
            "condition patch must be single-channel (reduce with grayscale weights first)".into(),
        ));
    }
    let data = s0.data().iter().map(|v| 2.0 * v - 1.0).collect();
    Tensor::new(1, 1, s0.height(), s0.width(), data)
}

/// Packs one polarization state into a 1-item target tensor for the given
/// representation. `s0` must be single-channel; radiance is assumed
/// normalized so grid values stay inside `[−1, 1]`.
pub fn encode_target(state: &PolarStateMap, repr: TargetRepresentation) -> Result<Tensor> {
    if state.s0.channels() != 1 {
        return Err(Error::Precondition("target encoding requires single-channel s0".into()));
    }
    let (w, h) = (state.width(), state.height());
    match repr {
        TargetRepresentation::EncodedAolpDolp => {
            let enc = crate::stokes::encode(state);
            let mut data = Vec::with_capacity(3 * w * h);
            data.extend_from_slice(enc.c.data());
            data.extend_from_slice(enc.s.data());
            data.extend_from_slice(enc.p_norm.data());
            Tensor::new(1, 3, h, w, data)
        }
        TargetRepresentation::RawAolpDolp => {
            let mut data = Vec::with_capacity(2 * w * h);
            for (phi, ok) in state.aolp.data().iter().zip(state.valid.data()) {
                data.push(if *ok { phi / FRAC_PI_2 } else { 0.0 });
            }
            for (p, ok) in state.dolp.data().iter().zip(state.valid.data()) {
                data.push(if *ok { 2.0 * p - 1.0 } else { -1.0 });
            }
            Tensor::new(1, 2, h, w, data)
        }
        TargetRepresentation::PolarImages4 => {
            let stack = synthesize_stack(state)?;
            let (gw, gh) = (2 * w, 2 * h);
            let mut data = vec![0.0; gw * gh];
            let quadrants: [(&RadianceImage, usize, usize); 4] = [
                (&stack.i0, 0, 0),
                (&stack.i45, w, 0),
                (&stack.i90, 0, h),
                (&stack.i135, w, h),
            ];
            for (img, ox, oy) in quadrants {
                for y in 0..h {
                    for x in 0..w {
                        data[(oy + y) * gw + (ox + x)] = 2.0 * img.get(x, y, 0) - 1.0;
                    }
                }
            }
            Tensor::new(1, 1, gh, gw, data)
        }
    }
}

/// Unpacks a sampled target tensor back into a polarization state.
///
/// `s0` supplies the intensity for the property-map representations; the
/// grid representation recovers intensity from its own four images and only
/// uses `s0` for dimension checking.
pub fn decode_representation(
    tensor: &Tensor,
    repr: TargetRepresentation,
    s0: &RadianceImage,
) -> Result<PolarStateMap> {
    if tensor.batch() != 1 {
        return Err(Error::Dimension("decode expects a single-item tensor".into()));
    }
    if tensor.channels() != repr.channels() {
        return Err(Error::Dimension(format!(
            "representation {repr} expects {} channels, tensor has {}",
            repr.channels(),
            tensor.channels()
        )));
    }
    let f = repr.spatial_factor();
    if tensor.height() != f * s0.height() || tensor.width() != f * s0.width() {
        return Err(Error::Dimension(format!(
            "tensor {}x{} does not match condition {}x{} at scale {f}",
            tensor.width(),
            tensor.height(),
            s0.width(),
            s0.height()
        )));
    }
    let (w, h) = (s0.width(), s0.height());
    match repr {
        TargetRepresentation::EncodedAolpDolp => {
            let n = w * h;
            let c = Plane::new(w, h, tensor.data()[..n].to_vec())?;
            let s = Plane::new(w, h, tensor.data()[n..2 * n].to_vec())?;
            let p = Plane::new(w, h, tensor.data()[2 * n..].to_vec())?;
            decode(&EncodedPolarMap::new(c, s, p)?, s0.clone())
        }
        TargetRepresentation::RawAolpDolp => {
            let n = w * h;
            let mut aolp = Vec::with_capacity(n);
            for v in &tensor.data()[..n] {
                aolp.push(wrap_aolp(v * FRAC_PI_2)?);
            }
            let dolp: Vec<f64> =
                tensor.data()[n..].iter().map(|v| ((v + 1.0) / 2.0).clamp(0.0, 1.0)).collect();
            PolarStateMap::new(
                s0.clone(),
                Plane::new(w, h, dolp)?,
                Plane::new(w, h, aolp)?,
                Mask::filled(w, h, true),
            )
        }
        TargetRepresentation::PolarImages4 => {
            let gw = 2 * w;
            let mut quads = [
                Vec::with_capacity(w * h),
                Vec::with_capacity(w * h),
                Vec::with_capacity(w * h),
                Vec::with_capacity(w * h),
            ];
            let offsets = [(0usize, 0usize), (w, 0), (0, h), (w, h)];
            for (quad, (ox, oy)) in quads.iter_mut().zip(offsets) {
                for y in 0..h {
                    for x in 0..w {
                        let v = tensor.data()[(oy + y) * gw + (ox + x)];
                        // Radiance is non-negative by definition; tiny negative
                        // excursions in the sampled grid clip to zero.
                        quad.push(((v + 1.0) / 2.0).max(0.0));
                    }
                }
            }
            let [d0, d45, d90, d135] = quads;
            let stack = PolarizationStack::new(
                RadianceImage::new(w, h, 1, d0)?,
                RadianceImage::new(w, h, 1, d45)?,
                RadianceImage::new(w, h, 1, d90)?,
                RadianceImage::new(w, h, 1, d135)?,
            )?;
            decompose_stack(&stack)
        }
    }
}
