//! Image-quality and polarization-error metrics.
//!
//! * PSNR and SSIM compare analyzer images;
//! * MAngE (mean angular error, degrees) compares AoLP maps with the π
//!   periodicity of the angle taken into account;
//! * MAbsE (mean absolute error) compares DoLP maps.
//!
//! Angular errors are only meaningful where polarization exists, so MAngE and
//! MAbsE run over the pixels where *both* inputs are valid. All reductions
//! use compensated summation so reports are bit-stable regardless of how the
//! pixel loop is chunked.

use crate::error::{Error, Result};
use crate::image::{Mask, Plane, RadianceImage};
use crate::stokes::{decompose_stack, wrap_aolp, PolarizationStack};
use std::f64::consts::PI;

/// Gaussian window size for SSIM.
const SSIM_WINDOW: usize = 11;
/// Gaussian window standard deviation for SSIM.
const SSIM_SIGMA: f64 = 1.5;
/// SSIM stabilization constants (fractions of the dynamic range).
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Kahan–Babuška compensated accumulator: the running error term makes the
/// sum independent of reasonable evaluation orderings.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Angular distance between two AoLP values, respecting π periodicity:
/// the minimum over `k ∈ {−1, 0, 1}` of `|est + kπ − gt|` after both inputs
/// are canonicalized. Always lands in `[0, π/2]`.
pub fn ang_e(phi_gt: f64, phi_est: f64) -> Result<f64> {
    let gt = wrap_aolp(phi_gt)?;
    let est = wrap_aolp(phi_est)?;
    let d = est - gt;
    Ok((d - PI).abs().min(d.abs()).min((d + PI).abs()))
}

/// Mean angular error in degrees over the mask.
pub fn mange(aolp_gt: &Plane, aolp_est: &Plane, mask: &Mask) -> Result<f64> {
    if !aolp_gt.same_shape(aolp_est)
        || mask.width() != aolp_gt.width()
        || mask.height() != aolp_gt.height()
    {
        return Err(Error::Dimension("AoLP maps and mask must share dimensions".into()));
    }
    let mut sum = KahanSum::default();
    let mut count = 0usize;
    for ((gt, est), ok) in aolp_gt.data().iter().zip(aolp_est.data()).zip(mask.data()) {
        if *ok {
            sum.add(ang_e(*gt, *est)?);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Numerical("mean angular error over an empty mask is undefined".into()));
    }
    Ok((sum.value() / count as f64).to_degrees())
}

/// Mean absolute DoLP error over the mask.
pub fn mabse(dolp_gt: &Plane, dolp_est: &Plane, mask: &Mask) -> Result<f64> {
    if !dolp_gt.same_shape(dolp_est)
        || mask.width() != dolp_gt.width()
        || mask.height() != dolp_gt.height()
    {
        return Err(Error::Dimension("DoLP maps and mask must share dimensions".into()));
    }
    for v in dolp_gt.data().iter().chain(dolp_est.data()) {
        if !(0.0..=1.0).contains(v) {
            return Err(Error::Precondition(format!("DoLP values must lie in [0,1], found {v}")));
        }
    }
    let mut sum = KahanSum::default();
    let mut count = 0usize;
    for ((gt, est), ok) in dolp_gt.data().iter().zip(dolp_est.data()).zip(mask.data()) {
        if *ok {
            sum.add((est - gt).abs());
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Numerical("mean absolute error over an empty mask is undefined".into()));
    }
    Ok(sum.value() / count as f64)
}

/// Peak signal-to-noise ratio in dB: `10·log10(peak² / MSE)`, restricted to
/// the mask when one is given. Identical inputs yield `f64::INFINITY`, the
/// documented sentinel for a zero MSE.
pub fn psnr(
    img: &RadianceImage,
    reference: &RadianceImage,
    peak: f64,
    mask: Option<&Mask>,
) -> Result<f64> {
    if !img.same_shape(reference) {
        return Err(Error::Dimension("PSNR inputs must share dimensions".into()));
    }
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::Precondition(format!("peak must be positive and finite, got {peak}")));
    }
    let ch = img.channels();
    let mut sum = KahanSum::default();
    let mut count = 0usize;
    for (px, (a, b)) in img.data().chunks_exact(ch).zip(reference.data().chunks_exact(ch)).enumerate()
    {
        if let Some(m) = mask {
            if !m.data()[px] {
                continue;
            }
        }
        for (x, y) in a.iter().zip(b) {
            let d = x - y;
            sum.add(d * d);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Numerical("PSNR over an empty mask is undefined".into()));
    }
    let mse = sum.value() / count as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Mean structural similarity over all positions where the 11×11 Gaussian
/// window (σ = 1.5) fits entirely inside the image. `peak` sets the dynamic
/// range entering the stabilization constants.
pub fn ssim(img: &RadianceImage, reference: &RadianceImage, peak: f64) -> Result<f64> {
    if !img.same_shape(reference) {
        return Err(Error::Dimension("SSIM inputs must share dimensions".into()));
    }
    if img.channels() != 1 {
        return Err(Error::Precondition("SSIM is defined on single-channel images".into()));
    }
    let (w, h) = (img.width(), img.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Precondition(format!(
            "image {w}x{h} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::Precondition(format!("peak must be positive and finite, got {peak}")));
    }

    // Normalized Gaussian window.
    let half = SSIM_WINDOW / 2;
    let mut window = [[0.0f64; SSIM_WINDOW]; SSIM_WINDOW];
    let mut norm = 0.0;
    for (wy, row) in window.iter_mut().enumerate() {
        for (wx, v) in row.iter_mut().enumerate() {
            let dx = wx as f64 - half as f64;
            let dy = wy as f64 - half as f64;
            *v = (-(dx * dx + dy * dy) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            norm += *v;
        }
    }
    window.iter_mut().flatten().for_each(|v| *v /= norm);

    let c1 = (SSIM_K1 * peak) * (SSIM_K1 * peak);
    let c2 = (SSIM_K2 * peak) * (SSIM_K2 * peak);
    let mut total = KahanSum::default();
    let mut count = 0usize;
    for cy in half..h - half {
        for cx in half..w - half {
            let (mut ma, mut mb) = (0.0f64, 0.0f64);
            for (wy, row) in window.iter().enumerate() {
                for (wx, wv) in row.iter().enumerate() {
                    let x = cx + wx - half;
                    let y = cy + wy - half;
                    ma += wv * img.get(x, y, 0);
                    mb += wv * reference.get(x, y, 0);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0f64, 0.0f64, 0.0f64);
            for (wy, row) in window.iter().enumerate() {
                for (wx, wv) in row.iter().enumerate() {
                    let x = cx + wx - half;
                    let y = cy + wy - half;
                    let da = img.get(x, y, 0) - ma;
                    let db = reference.get(x, y, 0) - mb;
                    va += wv * da * da;
                    vb += wv * db * db;
                    cov += wv * da * db;
                }
            }
            let s = ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            total.add(s);
            count += 1;
        }
    }
    Ok(total.value() / count as f64)
}

/// Complete comparison of two scenes: per-angle PSNR/SSIM on the analyzer
/// stacks and MAngE/MAbsE on the decomposed polarization properties.
#[derive(Debug, Clone)]
pub struct MetricReport {
    /// PSNR per analyzer image (0°, 45°, 90°, 135°), dB.
    pub psnr: [f64; 4],
    pub psnr_mean: f64,
    /// SSIM per analyzer image.
    pub ssim: [f64; 4],
    pub ssim_mean: f64,
    /// Mean angular AoLP error, degrees.
    pub mange_deg: f64,
    /// Mean absolute DoLP error.
    pub mabse: f64,
    /// Pixels where both scenes had defined polarization.
    pub pixel_count: usize,
}

impl MetricReport {
    /// Compares an estimated stack against a reference stack. Both are
    /// decomposed internally for the polarization-error terms.
    pub fn from_stacks(
        estimate: &PolarizationStack,
        reference: &PolarizationStack,
        peak: f64,
    ) -> Result<Self> {
        let mut psnr_values = [0.0f64; 4];
        let mut ssim_values = [0.0f64; 4];
        for (i, (est, gt)) in estimate.images().into_iter().zip(reference.images()).enumerate() {
            psnr_values[i] = psnr(est, gt, peak, None)?;
            ssim_values[i] = ssim(est, gt, peak)?;
        }
        let est_state = decompose_stack(estimate)?;
        let gt_state = decompose_stack(reference)?;
        let joint = est_state.valid.and(&gt_state.valid)?;
        let pixel_count = joint.count();
        let (mange_deg, mabse_value) = if pixel_count > 0 {
            (
                mange(&gt_state.aolp, &est_state.aolp, &joint)?,
                mabse(&gt_state.dolp, &est_state.dolp, &joint)?,
            )
        } else {
            (0.0, 0.0)
        };
        Ok(Self {
            psnr: psnr_values,
            psnr_mean: psnr_values.iter().sum::<f64>() / 4.0,
            ssim: ssim_values,
            ssim_mean: ssim_values.iter().sum::<f64>() / 4.0,
            mange_deg,
            mabse: mabse_value,
            pixel_count,
        })
    }

    /// Key=value block, one metric per line, `inf` for the PSNR sentinel.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for (i, angle) in [0, 45, 90, 135].into_iter().enumerate() {
            out.push_str(&format!("psnr_{angle}={}\n", format_db(self.psnr[i])));
            out.push_str(&format!("ssim_{angle}={:.6}\n", self.ssim[i]));
        }
        out.push_str(&format!("psnr_mean={}\n", format_db(self.psnr_mean)));
        out.push_str(&format!("ssim_mean={:.6}\n", self.ssim_mean));
        out.push_str(&format!("mange={:.6}\n", self.mange_deg));
        out.push_str(&format!("mabse={:.6}\n", self.mabse));
        out.push_str(&format!("pixel_count={}\n", self.pixel_count));
        out
    }

    pub fn csv_header() -> &'static str {
        "psnr_0,psnr_45,psnr_90,psnr_135,psnr_mean,ssim_0,ssim_45,ssim_90,ssim_135,ssim_mean,mange,mabse,pixel_count"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            format_db(self.psnr[0]),
            format_db(self.psnr[1]),
            format_db(self.psnr[2]),
            format_db(self.psnr[3]),
            format_db(self.psnr_mean),
            self.ssim[0],
            self.ssim[1],
            self.ssim[2],
            self.ssim[3],
            self.ssim_mean,
            self.mange_deg,
            self.mabse,
            self.pixel_count
        )
    }
}

fn format_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.6}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Plane;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn ang_e_hand_values() {
        assert_relative_eq!(
            ang_e(0.0, 45f64.to_radians()).unwrap(),
            45f64.to_radians(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            ang_e(89f64.to_radians(), -89f64.to_radians()).unwrap(),
            2f64.to_radians(),
            max_relative = 1e-9
        );
        for phi in [-1.0, 0.0, 0.3, 1.5] {
            assert_eq!(ang_e(phi, phi).unwrap(), 0.0);
        }
        assert!(ang_e(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn ang_e_bounded_by_quarter_turn() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let a = rng.gen_range(-10.0..10.0);
            let b = rng.gen_range(-10.0..10.0);
            let d = ang_e(a, b).unwrap();
            assert!((0.0..=FRAC_PI_2 + 1e-12).contains(&d));
            assert_abs_diff_eq!(d, ang_e(b, a).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn mange_identical_maps_is_zero() {
        let map = Plane::from_fn(8, 8, |x, y| ((x * 7 + y) as f64 * 0.01) - 0.3).unwrap();
        let mask = Mask::filled(8, 8, true);
        assert_eq!(mange(&map, &map, &mask).unwrap(), 0.0);
    }

    #[test]
    fn mange_uniform_random_calibrates_to_45_degrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 1_000_000usize;
        let (w, h) = (1000, 1000);
        let gt = Plane::new(w, h, (0..n).map(|_| rng.gen_range(-FRAC_PI_2..FRAC_PI_2)).collect())
            .unwrap();
        let est = Plane::new(w, h, (0..n).map(|_| rng.gen_range(-FRAC_PI_2..FRAC_PI_2)).collect())
            .unwrap();
        let m = mange(&gt, &est, &Mask::filled(w, h, true)).unwrap();
        assert!((m - 45.0).abs() < 0.5, "uniform-random MAngE {m}");
    }

    #[test]
    fn mange_constant_offset_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (w, h) = (64, 64);
        let gt_data: Vec<f64> = (0..w * h).map(|_| rng.gen_range(-FRAC_PI_2..FRAC_PI_2)).collect();
        let offset = 10f64.to_radians();
        let est_data: Vec<f64> =
            gt_data.iter().map(|v| wrap_aolp(v + offset).unwrap()).collect();
        let gt = Plane::new(w, h, gt_data).unwrap();
        let est = Plane::new(w, h, est_data).unwrap();
        let m = mange(&gt, &est, &Mask::filled(w, h, true)).unwrap();
        assert_relative_eq!(m, 10.0, max_relative = 1e-9);
    }

    #[test]
    fn mange_rejects_empty_mask() {
        let map = Plane::zeros(4, 4);
        assert!(mange(&map, &map, &Mask::filled(4, 4, false)).is_err());
    }

    #[test]
    fn mabse_hand_values() {
        let zeros = Plane::zeros(2, 2);
        let ones = Plane::new(2, 2, vec![1.0; 4]).unwrap();
        let mask = Mask::filled(2, 2, true);
        assert_eq!(mabse(&zeros, &zeros, &mask).unwrap(), 0.0);
        assert_eq!(mabse(&zeros, &ones, &mask).unwrap(), 1.0);
        assert!(mabse(&zeros, &Plane::new(2, 2, vec![1.5; 4]).unwrap(), &mask).is_err());
    }

    #[test]
    fn mabse_matches_reference_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (w, h) = (50, 50);
        let gt_data: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.0..1.0)).collect();
        let est_data: Vec<f64> = gt_data.iter().map(|v| (v + 0.1).clamp(0.0, 1.0)).collect();
        let expected: f64 = gt_data
            .iter()
            .zip(&est_data)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / (w * h) as f64;
        let gt = Plane::new(w, h, gt_data).unwrap();
        let est = Plane::new(w, h, est_data).unwrap();
        let got = mabse(&gt, &est, &Mask::filled(w, h, true)).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-12);
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let img = RadianceImage::from_fn(8, 8, |x, y| (x + y) as f64 * 0.01).unwrap();
        assert!(psnr(&img, &img, 1.0, None).unwrap().is_infinite());
    }

    #[test]
    fn psnr_constant_error_hand_value() {
        let a = RadianceImage::zeros(10, 10, 1);
        let b = RadianceImage::new(10, 10, 1, vec![0.1; 100]).unwrap();
        assert_relative_eq!(psnr(&a, &b, 1.0, None).unwrap(), 20.0, max_relative = 1e-12);
    }

    #[test]
    fn psnr_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a_data: Vec<f64> = (0..64).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b_data: Vec<f64> = (0..64).map(|_| rng.gen_range(0.0..1.0)).collect();
        let a1 = RadianceImage::new(8, 8, 1, a_data.clone()).unwrap();
        let b1 = RadianceImage::new(8, 8, 1, b_data.clone()).unwrap();
        let a255 =
            RadianceImage::new(8, 8, 1, a_data.iter().map(|v| v * 255.0).collect()).unwrap();
        let b255 =
            RadianceImage::new(8, 8, 1, b_data.iter().map(|v| v * 255.0).collect()).unwrap();
        assert_relative_eq!(
            psnr(&a1, &b1, 1.0, None).unwrap(),
            psnr(&a255, &b255, 255.0, None).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn ssim_identical_is_one() {
        let img = RadianceImage::from_fn(16, 16, |x, y| ((x * 3 + y * 5) % 7) as f64 / 7.0).unwrap();
        assert_relative_eq!(ssim(&img, &img, 1.0).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn ssim_negative_image_scores_low() {
        // High-contrast checkerboard vs its photographic negative.
        let img = RadianceImage::from_fn(32, 32, |x, y| ((x + y) % 2) as f64).unwrap();
        let neg = RadianceImage::from_fn(32, 32, |x, y| 1.0 - ((x + y) % 2) as f64).unwrap();
        let s = ssim(&img, &neg, 1.0).unwrap();
        assert!(s < 0.5, "SSIM of negative pair {s}");
    }

    #[test]
    fn ssim_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = RadianceImage::new(16, 16, 1, (0..256).map(|_| rng.gen_range(0.0..1.0)).collect())
            .unwrap();
        let b = RadianceImage::new(16, 16, 1, (0..256).map(|_| rng.gen_range(0.0..1.0)).collect())
            .unwrap();
        assert_relative_eq!(
            ssim(&a, &b, 1.0).unwrap(),
            ssim(&b, &a, 1.0).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn ssim_rejects_small_images() {
        let img = RadianceImage::zeros(8, 8, 1);
        assert!(ssim(&img, &img, 1.0).is_err());
    }

    #[test]
    fn report_on_identical_stacks_is_degenerate() {
        use crate::image::Mask as M;
        use crate::stokes::{synthesize_stack, PolarStateMap};
        let (w, h) = (16, 16);
        let state = PolarStateMap::new(
            RadianceImage::from_fn(w, h, |x, _| 0.4 + 0.01 * x as f64).unwrap(),
            Plane::new(w, h, vec![0.4; w * h]).unwrap(),
            Plane::from_fn(w, h, |x, y| 0.5 * ((x as f64 / 5.0).sin() + 0.3 * y as f64 / 7.0))
                .unwrap(),
            M::filled(w, h, true),
        )
        .unwrap();
        let stack = synthesize_stack(&state).unwrap();
        let report = MetricReport::from_stacks(&stack, &stack, 1.0).unwrap();
        assert!(report.psnr.iter().all(|v| v.is_infinite()));
        assert!(report.psnr_mean.is_infinite());
        for s in report.ssim {
            assert_relative_eq!(s, 1.0, max_relative = 1e-12);
        }
        assert_eq!(report.mange_deg, 0.0);
        assert_eq!(report.mabse, 0.0);
        assert!(report.pixel_count > 0);
        assert!(report.to_key_value().contains("psnr_0=inf"));
        assert!(report.to_csv_row().starts_with("inf,"));
    }

    proptest! {
        /// ang_e is a pseudometric: symmetric, zero iff equal mod π, and the
        /// triangle inequality holds.
        #[test]
        fn ang_e_triangle_inequality(
            a in -10.0f64..10.0,
            b in -10.0f64..10.0,
            c in -10.0f64..10.0,
        ) {
            let ab = ang_e(a, b).unwrap();
            let bc = ang_e(b, c).unwrap();
            let ac = ang_e(a, c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert!((ang_e(a, b).unwrap() - ang_e(b, a).unwrap()).abs() < 1e-12);
            prop_assert!(ang_e(a, a + PI).unwrap() < 1e-9);
        }
    }
}
