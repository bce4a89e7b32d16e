//! Analytic polarization ground truth and its inverse.
//!
//! Scenes are orthographic height fields viewed along +z. For a surface
//! normal with zenith `θ` (angle from the view axis) and azimuth `α`, the
//! Fresnel reflectance model gives closed-form degrees of linear
//! polarization:
//!
//! ```text
//! diffuse:  ρ_d(θ,η) = (η − 1/η)²·sin²θ /
//!                      (2 + 2η² − (η + 1/η)²·sin²θ + 4·cosθ·√(η² − sin²θ))
//! specular: ρ_s(θ,η) = 2·sin²θ·cosθ·√(η² − sin²θ) /
//!                      (η² − sin²θ − η²·sin²θ + 2·sin⁴θ)
//! ```
//!
//! The AoLP is locked to the azimuth: `Φ = α` for diffuse reflection and
//! `Φ = α + 90°` for specular. `ρ_d` is strictly increasing in `θ`, so the
//! diffuse zenith can be recovered from a measured DoLP by bisection; the
//! two-fold azimuth ambiguity (`α` vs `α + 180°`) is resolved with a
//! convexity prior — normals point outward from the mask centroid.
//!
//! These closed forms make every rendered pixel independently checkable and
//! every inversion testable against the exact forward model.

use crate::error::{Error, Result};
use crate::image::{Mask, Plane, RadianceImage};
use crate::stokes::{wrap_aolp, PolarStateMap, EPS_POL};
use std::f64::consts::FRAC_PI_2;

/// Upper zenith limit (radians) for rendering and inversion: 89.9°. Beyond
/// this the diffuse formula is numerically fragile and real surfaces are
/// occluded anyway.
pub const THETA_MAX: f64 = 89.9 * std::f64::consts::PI / 180.0;

/// Per-pixel unit normals in camera space (+z toward the camera, +x right,
/// +y up) with a foreground mask. `n_z > 0` wherever the mask is set.
#[derive(Debug, Clone)]
pub struct NormalMap {
    pub nx: Plane,
    pub ny: Plane,
    pub nz: Plane,
    pub mask: Mask,
}

impl NormalMap {
    pub fn new(nx: Plane, ny: Plane, nz: Plane, mask: Mask) -> Result<Self> {
        if !nx.same_shape(&ny) || !nx.same_shape(&nz) || mask.width() != nx.width()
            || mask.height() != nx.height()
        {
            return Err(Error::Dimension("normal map planes must share dimensions".into()));
        }
        for i in 0..nx.data().len() {
            if mask.data()[i] {
                let (x, y, z) = (nx.data()[i], ny.data()[i], nz.data()[i]);
                let len = (x * x + y * y + z * z).sqrt();
                if (len - 1.0).abs() > 1e-6 {
                    return Err(Error::Precondition(format!(
                        "normal at pixel {i} has length {len}, expected 1"
                    )));
                }
                if z <= 0.0 {
                    return Err(Error::Precondition(format!(
                        "normal at pixel {i} points away from the camera (n_z = {z})"
                    )));
                }
            }
        }
        Ok(Self { nx, ny, nz, mask })
    }

    pub fn width(&self) -> usize {
        self.nx.width()
    }

    pub fn height(&self) -> usize {
        self.nx.height()
    }
}

/// Reflection mode of a surface: which Fresnel DoLP curve applies and how the
/// AoLP relates to the azimuth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReflectionMode {
    Diffuse,
    Specular,
}

/// Homogeneous surface material.
#[derive(Debug, Clone, Copy)]
pub struct Material {
    pub eta: f64,
    pub mode: ReflectionMode,
    pub albedo: f64,
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 1.0 && self.eta <= 3.0) {
            return Err(Error::Precondition(format!(
                "refractive index must lie in (1, 3], got {}",
                self.eta
            )));
        }
        if !(0.0..=1.0).contains(&self.albedo) {
            return Err(Error::Precondition(format!(
                "albedo must lie in [0,1], got {}",
                self.albedo
            )));
        }
        Ok(())
    }
}

/// Single directional light plus an ambient floor.
#[derive(Debug, Clone, Copy)]
pub struct SceneLight {
    /// Unit vector pointing from the surface toward the light.
    pub direction: [f64; 3],
    pub ambient: f64,
}

impl SceneLight {
    pub fn validate(&self) -> Result<()> {
        let [x, y, z] = self.direction;
        let len = (x * x + y * y + z * z).sqrt();
        if (len - 1.0).abs() > 1e-6 {
            return Err(Error::Precondition(format!(
                "light direction must be unit length, got |d| = {len}"
            )));
        }
        if !(0.0..=1.0).contains(&self.ambient) {
            return Err(Error::Precondition(format!(
                "ambient must lie in [0,1], got {}",
                self.ambient
            )));
        }
        Ok(())
    }

    /// Builds a normalized light from an arbitrary non-zero direction.
    pub fn from_direction(direction: [f64; 3], ambient: f64) -> Result<Self> {
        let [x, y, z] = direction;
        let len = (x * x + y * y + z * z).sqrt();
        if len == 0.0 || !len.is_finite() {
            return Err(Error::Precondition("light direction must be non-zero".into()));
        }
        let light = Self { direction: [x / len, y / len, z / len], ambient };
        light.validate()?;
        Ok(light)
    }
}

/// Orthographic sphere: `n = (x/r, y/r, √(1 − (x²+y²)/r²))` inside the disk
/// of radius `r = radius_fraction · resolution/2` around the image center.
pub fn make_sphere(resolution: usize, radius_fraction: f64) -> Result<NormalMap> {
    if resolution < 16 {
        return Err(Error::Precondition(format!(
            "sphere resolution must be at least 16, got {resolution}"
        )));
    }
    if !(radius_fraction > 0.0 && radius_fraction <= 1.0) {
        return Err(Error::Precondition(format!(
            "radius fraction must lie in (0,1], got {radius_fraction}"
        )));
    }
    let center = (resolution as f64 - 1.0) / 2.0;
    let r = radius_fraction * resolution as f64 / 2.0;
    make_ellipsoid(resolution, center, center, r, r)
}

/// Orthographic ellipsoid blob `(x/a)² + (y/b)² + (z/c)² = 1` centered at
/// pixel `(cx, cy)` with image-plane semi-axes `a = rx`, `b = ry` and height
/// semi-axis `c = √(rx·ry)` pixels. Normals are the exact implicit-surface
/// gradients, normalized; `rx = ry` reduces to the sphere closed form
/// `n = (x/r, y/r, √(1 − (x²+y²)/r²))`.
pub fn make_ellipsoid(
    resolution: usize,
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
) -> Result<NormalMap> {
    if rx <= 0.0 || ry <= 0.0 {
        return Err(Error::Precondition("ellipsoid semi-axes must be positive".into()));
    }
    let rz = (rx * ry).sqrt();
    let n = resolution;
    let mut nx = Plane::zeros(n, n);
    let mut ny = Plane::zeros(n, n);
    let mut nz = Plane::zeros(n, n);
    let mut mask = Mask::filled(n, n, false);
    for row in 0..n {
        for col in 0..n {
            // +y is up: convert from row (downwards) to camera space.
            let x = (col as f64 - cx) / rx;
            let y = (cy - row as f64) / ry;
            let rho2 = x * x + y * y;
            if rho2 < 1.0 {
                let z = (1.0 - rho2).sqrt();
                // Gradient of (x/a)² + (y/b)² + (z/c)², normalized.
                let gx = x / rx;
                let gy = y / ry;
                let gz = z / rz;
                let len = (gx * gx + gy * gy + gz * gz).sqrt();
                nx.set(col, row, gx / len);
                ny.set(col, row, gy / len);
                nz.set(col, row, gz / len);
                mask.set(col, row, true);
            } else {
                nz.set(col, row, 1.0); // placeholder off the mask
            }
        }
    }
    NormalMap::new(nx, ny, nz, mask)
}

fn check_theta_eta(theta: f64, eta: f64) -> Result<()> {
    if !(theta >= 0.0 && theta < FRAC_PI_2) {
        return Err(Error::Precondition(format!(
            "zenith angle must lie in [0, π/2), got {theta}"
        )));
    }
    if !(eta > 1.0 && eta.is_finite()) {
        return Err(Error::Precondition(format!("refractive index must exceed 1, got {eta}")));
    }
    Ok(())
}

/// Diffuse Fresnel DoLP. Strictly increasing in `θ` on `[0, π/2)`.
pub fn rho_diffuse(theta: f64, eta: f64) -> Result<f64> {
    check_theta_eta(theta, eta)?;
    let s2 = theta.sin() * theta.sin();
    let a = eta - 1.0 / eta;
    let b = eta + 1.0 / eta;
    let num = a * a * s2;
    let den = 2.0 + 2.0 * eta * eta - b * b * s2 + 4.0 * theta.cos() * (eta * eta - s2).sqrt();
    Ok((num / den).clamp(0.0, 1.0))
}

/// Specular Fresnel DoLP. Zero at normal incidence, peaks near the Brewster
/// angle; the closed form stays finite for `η ≤ 3`.
pub fn rho_specular(theta: f64, eta: f64) -> Result<f64> {
    check_theta_eta(theta, eta)?;
    let s2 = theta.sin() * theta.sin();
    let e2 = eta * eta;
    let num = 2.0 * s2 * theta.cos() * (e2 - s2).sqrt();
    let den = e2 - s2 - e2 * s2 + 2.0 * s2 * s2;
    Ok((num / den).clamp(0.0, 1.0))
}

/// Renders the polarization state of a lit surface.
///
/// Per masked pixel with zenith `θ = arccos(n_z)` and azimuth
/// `α = atan2(n_y, n_x)`:
/// * DoLP from the mode's Fresnel curve;
/// * AoLP `= wrap(α)` (diffuse) or `wrap(α + 90°)` (specular);
/// * `s0 = albedo·max(0, n·light) + ambient` (Lambertian shading; the same
///   shading applies in both modes).
///
/// Off-mask pixels show the ambient level with no polarization. Pixels whose
/// zenith reaches [`THETA_MAX`], or whose DoLP falls below the validity
/// threshold, are flagged invalid.
pub fn render_polar(
    normals: &NormalMap,
    material: &Material,
    light: &SceneLight,
) -> Result<PolarStateMap> {
    material.validate()?;
    light.validate()?;
    let (w, h) = (normals.width(), normals.height());
    let n = w * h;
    let mut s0 = Vec::with_capacity(n);
    let mut dolp = Vec::with_capacity(n);
    let mut aolp = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for i in 0..n {
        if !normals.mask.data()[i] {
            s0.push(light.ambient);
            dolp.push(0.0);
            aolp.push(0.0);
            valid.push(false);
            continue;
        }
        let (nx, ny, nz) = (normals.nx.data()[i], normals.ny.data()[i], normals.nz.data()[i]);
        let theta = nz.clamp(-1.0, 1.0).acos();
        let shade =
            (nx * light.direction[0] + ny * light.direction[1] + nz * light.direction[2]).max(0.0);
        s0.push(material.albedo * shade + light.ambient);
        if theta >= THETA_MAX {
            dolp.push(0.0);
            aolp.push(0.0);
            valid.push(false);
            continue;
        }
        let alpha = ny.atan2(nx);
        let (p, phi) = match material.mode {
            ReflectionMode::Diffuse => (rho_diffuse(theta, material.eta)?, wrap_aolp(alpha)?),
            ReflectionMode::Specular => {
                (rho_specular(theta, material.eta)?, wrap_aolp(alpha + FRAC_PI_2)?)
            }
        };
        let ok = p >= EPS_POL;
        dolp.push(p);
        aolp.push(if ok { phi } else { 0.0 });
        valid.push(ok);
    }
    PolarStateMap::new(
        RadianceImage::new(w, h, 1, s0)?,
        Plane::new(w, h, dolp)?,
        Plane::new(w, h, aolp)?,
        Mask::new(w, h, valid)?,
    )
}

/// Recovers the zenith angle whose diffuse DoLP equals `p` by bisection on
/// `[0, THETA_MAX]`; the curve's strict monotonicity guarantees convergence.
/// Returns `None` when `p` exceeds the attainable range.
pub fn invert_rho_diffuse(p: f64, eta: f64) -> Result<Option<f64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Precondition(format!("DoLP must lie in [0,1], got {p}")));
    }
    let max_p = rho_diffuse(THETA_MAX, eta)?;
    if p > max_p {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0f64, THETA_MAX);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if rho_diffuse(mid, eta)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Inverts a diffuse-rendered polarization state back to surface normals.
///
/// The zenith comes from [`invert_rho_diffuse`]; the azimuth is the AoLP with
/// its 180° ambiguity resolved by the convexity prior: of the two candidates,
/// keep the one whose projection onto the image plane points away from the
/// valid-mask centroid. Pixels whose DoLP exceeds the attainable diffuse
/// range are dropped from the output mask.
pub fn invert_diffuse(state: &PolarStateMap, material: &Material) -> Result<NormalMap> {
    material.validate()?;
    if material.mode != ReflectionMode::Diffuse {
        return Err(Error::Precondition(
            "inversion assumes a diffuse state; specular AoLP is offset by 90°".into(),
        ));
    }
    let (w, h) = (state.width(), state.height());

    // Centroid of the valid mask in (x, y-up) camera coordinates.
    let (mut sx, mut sy, mut count) = (0.0f64, 0.0f64, 0usize);
    for row in 0..h {
        for col in 0..w {
            if state.valid.get(col, row) {
                sx += col as f64;
                sy += -(row as f64);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::Precondition("state has no valid pixels to invert".into()));
    }
    let (cx, cy) = (sx / count as f64, sy / count as f64);

    let mut nx = Plane::zeros(w, h);
    let mut ny = Plane::zeros(w, h);
    let mut nz = Plane::zeros(w, h);
    let mut mask = Mask::filled(w, h, false);
    for row in 0..h {
        for col in 0..w {
            if !state.valid.get(col, row) {
                nz.set(col, row, 1.0);
                continue;
            }
            let Some(theta) = invert_rho_diffuse(state.dolp.get(col, row), material.eta)? else {
                nz.set(col, row, 1.0);
                continue;
            };
            let phi = state.aolp.get(col, row);
            let (dx, dy) = (col as f64 - cx, -(row as f64) - cy);
            // Candidate azimuths phi and phi + π; prefer the outward one.
            let (sin_phi, cos_phi) = phi.sin_cos();
            let outward = cos_phi * dx + sin_phi * dy;
            let (ax, ay) = if outward >= 0.0 { (cos_phi, sin_phi) } else { (-cos_phi, -sin_phi) };
            let sin_theta = theta.sin();
            nx.set(col, row, sin_theta * ax);
            ny.set(col, row, sin_theta * ay);
            nz.set(col, row, theta.cos());
            mask.set(col, row, true);
        }
    }
    NormalMap::new(nx, ny, nz, mask)
}
