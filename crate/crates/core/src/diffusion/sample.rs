//! Ancestral sampling from a trained (or untrained) ε-predictor.

use crate::diffusion::model::DiffusionModel;
use crate::diffusion::schedule::NoiseSchedule;
use crate::diffusion::tensor::Tensor;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Draws one target tensor for a single condition patch.
///
/// Standard ancestral sampling: `z_T ~ N(0, 1)`, then for `t = T..1`
///
/// ```text
/// z_{t−1} = (z_t − (β_t/√(1−ᾱ_t))·ε̂(z_t, t, cond)) / √α_t + σ_t·ξ
/// ```
///
/// with `σ_t² = β_t` and `ξ = 0` on the final step. The result is clamped to
/// `[−1, 1]`, the valid range of every target representation. Fixed seeds
/// give bit-identical samples.
pub fn sample(
    model: &DiffusionModel,
    cond: &Tensor,
    schedule: &NoiseSchedule,
    seed: u64,
) -> Result<Tensor> {
    if cond.batch() != 1 || cond.channels() != 1 {
        return Err(Error::Dimension(format!(
            "sampling expects a single 1-channel condition patch, got {}x{} channels x batch",
            cond.channels(),
            cond.batch()
        )));
    }
    let scale = model.config.representation.spatial_factor();
    let zc = model.config.representation.channels();
    let (h, w) = (scale * cond.height(), scale * cond.width());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = Tensor::zeros(1, zc, h, w);
    for v in z.data_mut() {
        *v = rng.sample(StandardNormal);
    }

    for t in (1..=schedule.t_count()).rev() {
        let pred = model.predict_noise(&z, &[t], cond)?;
        let beta = schedule.beta(t);
        let alpha = schedule.alpha(t);
        let ab = schedule.alpha_bar(t);
        let coef = beta / (1.0 - ab).sqrt();
        let inv_sqrt_alpha = 1.0 / alpha.sqrt();
        for (zv, pv) in z.data_mut().iter_mut().zip(pred.data()) {
            *zv = (*zv - coef * pv) * inv_sqrt_alpha;
        }
        if t > 1 {
            let sigma = beta.sqrt();
            for zv in z.data_mut() {
                let xi: f64 = rng.sample(StandardNormal);
                *zv += sigma * xi;
            }
        }
    }
    for v in z.data_mut() {
        *v = v.clamp(-1.0, 1.0);
    }
    Ok(z)
}
