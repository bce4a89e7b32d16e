//! Forward-process variance schedule.
//!
//! The forward process destroys signal at rate β_t; the products
//! ᾱ_t = ∏_{s≤t} (1 − β_s) give the closed-form marginal
//! `z_t = √ᾱ_t·z_0 + √(1−ᾱ_t)·ε`. For sampling to start from pure noise the
//! terminal marginal must be (close to) standard normal, so construction
//! rejects schedules whose ᾱ_T ≥ 0.01 — with such a schedule the z_T the
//! sampler is fed (pure N(0,1)) would not match the z_T the model was trained
//! on, and quality silently degrades.

use crate::error::{Error, Result};

/// Default timestep count.
pub const DEFAULT_TIMESTEPS: usize = 200;
/// Default β_1.
pub const DEFAULT_BETA_START: f64 = 1e-4;
/// Default β_T. At T = 200 this drives ᾱ_T ≈ 6.1e-3, comfortably inside the
/// terminal-variance requirement. (A commonly quoted alternative, 0.02, only
/// reaches ᾱ ≈ 0.13 after 200 steps and is therefore rejected here.)
pub const DEFAULT_BETA_END: f64 = 0.05;
/// Upper bound on the terminal signal fraction ᾱ_T.
pub const MAX_TERMINAL_ALPHA_BAR: f64 = 0.01;

/// Variance schedule with precomputed α_t and ᾱ_t products.
///
/// Timesteps are 1-based: `t ∈ [1, T]`, matching the conventional notation.
#[derive(Debug, Clone)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// The schedule used throughout this crate unless overridden.
    pub fn default_toy() -> Self {
        make_schedule(DEFAULT_TIMESTEPS, DEFAULT_BETA_START, DEFAULT_BETA_END)
            .expect("default schedule parameters are valid")
    }

    pub fn t_count(&self) -> usize {
        self.betas.len()
    }

    /// β_t for `t ∈ [1, T]`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    /// α_t = 1 − β_t.
    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    /// ᾱ_t = ∏_{s ≤ t} α_s.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t - 1]
    }

    pub fn terminal_alpha_bar(&self) -> f64 {
        *self.alpha_bars.last().expect("schedule is nonempty")
    }

    /// Validates a timestep index.
    pub fn check_t(&self, t: usize) -> Result<()> {
        if t < 1 || t > self.t_count() {
            return Err(Error::Precondition(format!(
                "timestep {t} outside [1, {}]",
                self.t_count()
            )));
        }
        Ok(())
    }
}

/// Builds a linear β schedule: β_t interpolates `beta_start → beta_end` over
/// `t = 1..T`, with products accumulated in double precision.
pub fn make_schedule(t_count: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if t_count < 10 {
        return Err(Error::Precondition(format!(
            "schedule needs at least 10 timesteps, got {t_count}"
        )));
    }
    if !(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0) {
        return Err(Error::Precondition(format!(
            "betas must satisfy 0 < start < end < 1, got start={beta_start} end={beta_end}"
        )));
    }
    let mut betas = Vec::with_capacity(t_count);
    let mut alphas = Vec::with_capacity(t_count);
    let mut alpha_bars = Vec::with_capacity(t_count);
    let mut product = 1.0f64;
    for i in 0..t_count {
        let frac = i as f64 / (t_count - 1) as f64;
        let beta = beta_start + (beta_end - beta_start) * frac;
        let alpha = 1.0 - beta;
        product *= alpha;
        betas.push(beta);
        alphas.push(alpha);
        alpha_bars.push(product);
    }
    let terminal = *alpha_bars.last().expect("nonempty");
    if terminal >= MAX_TERMINAL_ALPHA_BAR {
        return Err(Error::Precondition(format!(
            "schedule leaves terminal signal fraction {terminal:.4} >= {MAX_TERMINAL_ALPHA_BAR}; \
             raise beta_end or the step count so the final marginal is standard normal \
             (e.g. T=200 with beta_end=0.05 reaches {:.2e})",
            0.00612 // reference point for the default schedule
        )));
    }
    Ok(NoiseSchedule { betas, alphas, alpha_bars })
}
