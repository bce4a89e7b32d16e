//! Shared fixtures for the criterion benchmarks: deterministic random
//! scenes and training batches at the sizes the benches exercise.

use polar_core::diffusion::Tensor;
use polar_core::image::{Mask, Plane, RadianceImage};
use polar_core::stokes::{synthesize_stack, PolarStateMap, PolarizationStack};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::FRAC_PI_2;

/// Fully valid random polarization state on a w x h grid.
pub fn random_state(w: usize, h: usize, seed: u64) -> PolarStateMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = w * h;
    let s0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let dolp: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let aolp: Vec<f64> = (0..n).map(|_| rng.gen_range(-FRAC_PI_2..FRAC_PI_2)).collect();
    PolarStateMap::new(
        RadianceImage::new(w, h, 1, s0).expect("uniform draws are valid radiance"),
        Plane::new(w, h, dolp).expect("finite"),
        Plane::new(w, h, aolp).expect("finite"),
        Mask::filled(w, h, true),
    )
    .expect("draws respect all ranges")
}

/// Malus-consistent analyzer stack synthesized from [`random_state`].
pub fn random_stack(w: usize, h: usize, seed: u64) -> PolarizationStack {
    synthesize_stack(&random_state(w, h, seed)).expect("valid state synthesizes")
}

/// Uniform tensor in [-1, 1).
pub fn uniform_tensor(rng: &mut ChaCha8Rng, n: usize, c: usize, h: usize, w: usize) -> Tensor {
    let data = (0..n * c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::new(n, c, h, w, data).expect("shape matches data")
}

/// Standard-normal tensor.
pub fn normal_tensor(rng: &mut ChaCha8Rng, n: usize, c: usize, h: usize, w: usize) -> Tensor {
    let data = (0..n * c * h * w).map(|_| rng.sample(StandardNormal)).collect();
    Tensor::new(n, c, h, w, data).expect("shape matches data")
}
