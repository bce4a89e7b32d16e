//! Polarization image formation and recovery.
//!
//! A linear analyzer at angle `θ` in front of partially linearly polarized
//! light of total intensity `s0`, degree of linear polarization `P` and angle
//! of linear polarization `Φ` transmits
//!
//! ```text
//! I_θ = s0/2 · (1 + P·cos(2θ − 2Φ))
//! ```
//!
//! Sampling `θ` at 0°, 45°, 90° and 135° gives the canonical four-image stack
//! from which the linear Stokes components and hence `(s0, P, Φ)` are
//! recovered in closed form:
//!
//! ```text
//! s0 = (i0 + i45 + i90 + i135) / 2
//! Φ  = ½·atan2(i45 − i135, i0 − i90)
//! P  = √((i0 − i90)² + (i45 − i135)²) / s0
//! ```
//!
//! The module also provides the sinusoidal encoding `(cos 2Φ, sin 2Φ, 2P−1)`
//! used as the generative-model target: it is continuous across the ±90°
//! wrap of `Φ` and maps every channel into `[−1, 1]`.

use crate::error::{Error, Result};
use crate::image::{Mask, Plane, RadianceImage};
use std::f64::consts::{FRAC_PI_2, PI};

/// Relative Stokes-magnitude threshold below which AoLP is considered
/// undefined: a pixel is invalid when `√(s1²+s2²) < EPS_POL·s0`.
pub const EPS_POL: f64 = 1e-6;

/// Absolute darkness threshold: a pixel with `s0 < EPS_DARK` is invalid
/// regardless of its Stokes magnitude.
pub const EPS_DARK: f64 = 1e-8;

/// Minimum length of the `(cos 2Φ, sin 2Φ)` vector for a decoded pixel to be
/// considered valid. Network outputs near the origin carry no usable angle.
pub const EPS_ENC: f64 = 1e-3;

/// Four analyzer images at 0°, 45°, 90° and 135°, dimension-matched.
#[derive(Debug, Clone)]
pub struct PolarizationStack {
    pub i0: RadianceImage,
    pub i45: RadianceImage,
    pub i90: RadianceImage,
    pub i135: RadianceImage,
}

impl PolarizationStack {
    pub fn new(
        i0: RadianceImage,
        i45: RadianceImage,
        i90: RadianceImage,
        i135: RadianceImage,
    ) -> Result<Self> {
        if !(i0.same_shape(&i45) && i0.same_shape(&i90) && i0.same_shape(&i135)) {
            return Err(Error::Dimension(
                "the four analyzer images must share width, height and channels".into(),
            ));
        }
        Ok(Self { i0, i45, i90, i135 })
    }

    pub fn width(&self) -> usize {
        self.i0.width()
    }

    pub fn height(&self) -> usize {
        self.i0.height()
    }

    pub fn channels(&self) -> usize {
        self.i0.channels()
    }

    /// The four images in analyzer-angle order 0°, 45°, 90°, 135°.
    pub fn images(&self) -> [&RadianceImage; 4] {
        [&self.i0, &self.i45, &self.i90, &self.i135]
    }

    /// Reduces every image to grayscale with the given weights.
    pub fn to_grayscale(&self, weights: [f64; 3]) -> Self {
        Self {
            i0: self.i0.to_grayscale(weights),
            i45: self.i45.to_grayscale(weights),
            i90: self.i90.to_grayscale(weights),
            i135: self.i135.to_grayscale(weights),
        }
    }
}

/// Per-pixel polarization state: total intensity, DoLP, AoLP and a validity
/// mask marking pixels where the angle is physically defined.
///
/// `s0` may be 1- or 3-channel; `dolp`, `aolp` and `valid` are per-pixel
/// (channel-independent) planes of the same spatial size.
#[derive(Debug, Clone)]
pub struct PolarStateMap {
    pub s0: RadianceImage,
    pub dolp: Plane,
    pub aolp: Plane,
    pub valid: Mask,
}

impl PolarStateMap {
    pub fn new(s0: RadianceImage, dolp: Plane, aolp: Plane, valid: Mask) -> Result<Self> {
        let (w, h) = (s0.width(), s0.height());
        if dolp.width() != w
            || dolp.height() != h
            || !dolp.same_shape(&aolp)
            || valid.width() != w
            || valid.height() != h
        {
            return Err(Error::Dimension("polarization state fields must share dimensions".into()));
        }
        if let Some(p) = dolp.data().iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Precondition(format!("DoLP must lie in [0,1], found {p}")));
        }
        for (i, (&phi, &ok)) in aolp.data().iter().zip(valid.data()).enumerate() {
            if ok && !(phi > -FRAC_PI_2 && phi <= FRAC_PI_2) {
                return Err(Error::Precondition(format!(
                    "AoLP at valid pixel {i} is {phi}, outside (-pi/2, pi/2]"
                )));
            }
        }
        Ok(Self { s0, dolp, aolp, valid })
    }

    pub fn width(&self) -> usize {
        self.s0.width()
    }

    pub fn height(&self) -> usize {
        self.s0.height()
    }
}

/// Sinusoidal encoding of a polarization state: `c = cos 2Φ`, `s = sin 2Φ`,
/// `p_norm = 2P − 1`. All channels lie in `[−1, 1]`; invalid pixels carry the
/// neutral values `(1, 0, −1)`.
#[derive(Debug, Clone)]
pub struct EncodedPolarMap {
    pub c: Plane,
    pub s: Plane,
    pub p_norm: Plane,
}

impl EncodedPolarMap {
    pub fn new(c: Plane, s: Plane, p_norm: Plane) -> Result<Self> {
        if !c.same_shape(&s) || !c.same_shape(&p_norm) {
            return Err(Error::Dimension("encoded planes must share dimensions".into()));
        }
        Ok(Self { c, s, p_norm })
    }

    pub fn width(&self) -> usize {
        self.c.width()
    }

    pub fn height(&self) -> usize {
        self.c.height()
    }
}

/// Maps an angle onto its canonical representative in `(−π/2, π/2]`.
///
/// AoLP is defined modulo π; this picks the representative used everywhere in
/// the crate. The implementation relies on `rem_euclid` (exact for floats)
/// followed by a single subtraction that is exact by Sterbenz's lemma, so
/// angles that differ by an exactly-representable π shift canonicalize to
/// bit-identical results.
pub fn wrap_aolp(phi: f64) -> Result<f64> {
    if !phi.is_finite() {
        return Err(Error::Precondition(format!("angle must be finite, got {phi}")));
    }
    let r = phi.rem_euclid(PI); // in [0, π)
    Ok(if r > FRAC_PI_2 { r - PI } else { r })
}

/// Evaluates the analyzer transmission model at angle `theta` (radians) for
/// every pixel. Invalid pixels are treated as unpolarized (`P = 0`), so the
/// output there is `s0/2`.
pub fn malus_intensity(state: &PolarStateMap, theta: f64) -> Result<RadianceImage> {
    if !theta.is_finite() {
        return Err(Error::Precondition(format!("analyzer angle must be finite, got {theta}")));
    }
    let (w, h, ch) = (state.width(), state.height(), state.s0.channels());
    let mut data = Vec::with_capacity(w * h * ch);
    for (px, s0_px) in state.s0.data().chunks_exact(ch).enumerate() {
        let p = if state.valid.data()[px] { state.dolp.data()[px] } else { 0.0 };
        let phi = state.aolp.data()[px];
        let modulation = 1.0 + p * (2.0 * theta - 2.0 * phi).cos();
        for &s0 in s0_px {
            data.push(s0 / 2.0 * modulation);
        }
    }
    RadianceImage::new(w, h, ch, data)
}

/// Renders the four canonical analyzer images from a polarization state.
///
/// The per-pixel `cos 2Φ` / `sin 2Φ` terms are computed once and shared by
/// the four images, so the redundancy identity `i0 + i90 = i45 + i135` holds
/// to within a few ulp by construction.
pub fn synthesize_stack(state: &PolarStateMap) -> Result<PolarizationStack> {
    let (w, h, ch) = (state.width(), state.height(), state.s0.channels());
    let n = w * h * ch;
    let mut d0 = Vec::with_capacity(n);
    let mut d45 = Vec::with_capacity(n);
    let mut d90 = Vec::with_capacity(n);
    let mut d135 = Vec::with_capacity(n);
    for (px, s0_px) in state.s0.data().chunks_exact(ch).enumerate() {
        let p = if state.valid.data()[px] { state.dolp.data()[px] } else { 0.0 };
        let phi = state.aolp.data()[px];
        let (sin2, cos2) = (2.0 * phi).sin_cos();
        let (pc, ps) = (p * cos2, p * sin2);
        for &s0 in s0_px {
            let half = s0 / 2.0;
            d0.push(half * (1.0 + pc));
            d45.push(half * (1.0 + ps));
            d90.push(half * (1.0 - pc));
            d135.push(half * (1.0 - ps));
        }
    }
    PolarizationStack::new(
        RadianceImage::new(w, h, ch, d0)?,
        RadianceImage::new(w, h, ch, d45)?,
        RadianceImage::new(w, h, ch, d90)?,
        RadianceImage::new(w, h, ch, d135)?,
    )
}

/// Recovers `(s0, P, Φ)` from a single-channel four-image stack.
///
/// Pixels whose Stokes magnitude falls below `EPS_POL·s0`, or whose total
/// intensity falls below `EPS_DARK`, are flagged invalid with `Φ = 0`.
/// `P` is clamped into `[0, 1]`; measured stacks may exceed 1 through noise
/// and the pre-clamp value is deliberately discarded.
pub fn decompose_stack(stack: &PolarizationStack) -> Result<PolarStateMap> {
    if stack.channels() != 1 {
        return Err(Error::Dimension(
            "decompose expects a single-channel stack; reduce to grayscale first".into(),
        ));
    }
    let (w, h) = (stack.width(), stack.height());
    let n = w * h;
    let mut s0 = Vec::with_capacity(n);
    let mut dolp = Vec::with_capacity(n);
    let mut aolp = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for px in 0..n {
        let (i0, i45) = (stack.i0.data()[px], stack.i45.data()[px]);
        let (i90, i135) = (stack.i90.data()[px], stack.i135.data()[px]);
        let s1 = i0 - i90;
        let s2 = i45 - i135;
        let total = (i0 + i45 + i90 + i135) / 2.0;
        let magnitude = (s1 * s1 + s2 * s2).sqrt();
        let ok = total >= EPS_DARK && magnitude >= EPS_POL * total;
        s0.push(total);
        if ok {
            dolp.push((magnitude / total).clamp(0.0, 1.0));
            aolp.push(wrap_aolp(0.5 * s2.atan2(s1))?);
        } else {
            dolp.push(if total >= EPS_DARK { (magnitude / total).clamp(0.0, 1.0) } else { 0.0 });
            aolp.push(0.0);
        }
        valid.push(ok);
    }
    PolarStateMap::new(
        RadianceImage::new(w, h, 1, s0)?,
        Plane::new(w, h, dolp)?,
        Plane::new(w, h, aolp)?,
        Mask::new(w, h, valid)?,
    )
}

/// Total intensity `(i0 + i45 + i90 + i135) / 2`, identical to the `s0`
/// recovered by [`decompose_stack`]. Works for any channel count.
pub fn unpolarized_intensity(stack: &PolarizationStack) -> RadianceImage {
    let (w, h, ch) = (stack.width(), stack.height(), stack.channels());
    let data = stack
        .i0
        .data()
        .iter()
        .zip(stack.i45.data())
        .zip(stack.i90.data())
        .zip(stack.i135.data())
        .map(|(((a, b), c), d)| (a + b + c + d) / 2.0)
        .collect();
    RadianceImage::new(w, h, ch, data).expect("sums of non-negative radiance are valid")
}

/// Largest relative violation of the redundancy identity `i0 + i90 = i45 +
/// i135` across all pixels and channels. Zero (to rounding) for synthesized
/// stacks; positive for noisy measured data.
pub fn consistency_residual(stack: &PolarizationStack) -> f64 {
    let mut worst: f64 = 0.0;
    for (((a, b), c), d) in stack
        .i0
        .data()
        .iter()
        .zip(stack.i45.data())
        .zip(stack.i90.data())
        .zip(stack.i135.data())
    {
        let s0 = (a + b + c + d) / 2.0;
        let residual = ((a + c) - (b + d)).abs() / s0.max(EPS_DARK);
        worst = worst.max(residual);
    }
    worst
}

/// Encodes a state into `(cos 2Φ, sin 2Φ, 2P − 1)`. Invalid pixels encode as
/// `(1, 0, −1)`, i.e. the angle is treated as 0 and the DoLP as 0.
pub fn encode(state: &PolarStateMap) -> EncodedPolarMap {
    let (w, h) = (state.width(), state.height());
    let n = w * h;
    let mut c = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut p_norm = Vec::with_capacity(n);
    for px in 0..n {
        if state.valid.data()[px] {
            let (sin2, cos2) = (2.0 * state.aolp.data()[px]).sin_cos();
            c.push(cos2);
            s.push(sin2);
            p_norm.push(2.0 * state.dolp.data()[px] - 1.0);
        } else {
            c.push(1.0);
            s.push(0.0);
            p_norm.push(-1.0);
        }
    }
    EncodedPolarMap {
        c: Plane::new(w, h, c).expect("trig output is finite"),
        s: Plane::new(w, h, s).expect("trig output is finite"),
        p_norm: Plane::new(w, h, p_norm).expect("affine output is finite"),
    }
}

/// Inverts [`encode`]: `Φ = ½·atan2(s, c)` canonicalized, `P = (p_norm+1)/2`
/// clamped into `[0,1]`, with `s0` passed through. Pixels whose `(c, s)`
/// vector is shorter than [`EPS_ENC`] are flagged invalid — network outputs
/// near the origin carry no direction information.
pub fn decode(enc: &EncodedPolarMap, s0: RadianceImage) -> Result<PolarStateMap> {
    let (w, h) = (enc.width(), enc.height());
    if s0.width() != w || s0.height() != h {
        return Err(Error::Dimension("s0 dimensions must match the encoded map".into()));
    }
    let n = w * h;
    let mut dolp = Vec::with_capacity(n);
    let mut aolp = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for px in 0..n {
        let (c, s) = (enc.c.data()[px], enc.s.data()[px]);
        let ok = (c * c + s * s).sqrt() >= EPS_ENC;
        aolp.push(if ok { wrap_aolp(0.5 * s.atan2(c))? } else { 0.0 });
        dolp.push(((enc.p_norm.data()[px] + 1.0) / 2.0).clamp(0.0, 1.0));
        valid.push(ok);
    }
    PolarStateMap::new(s0, Plane::new(w, h, dolp)?, Plane::new(w, h, aolp)?, Mask::new(w, h, valid)?)
}
