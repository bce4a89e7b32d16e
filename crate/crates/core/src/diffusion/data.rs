//! Procedurally rendered training scenes.
//!
//! Each scene is a jittered ellipsoid blob rendered through the diffuse
//! polarization model under a random upper-hemisphere light, so the network
//! must infer a position-dependent angle field from shading alone. Scenes
//! are diffuse-only: under a randomized reflection mode the 90° specular
//! angle shift is unobservable from the intensity condition, which would
//! make the angle target ill-posed rather than merely hard.

use crate::error::{Error, Result};
use crate::oracle::{make_ellipsoid, render_polar, Material, ReflectionMode, SceneLight};
use crate::stokes::PolarStateMap;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// One rendered training example. The intensity channel of `state` is the
/// condition; the polarization fields are the target.
#[derive(Debug, Clone)]
pub struct OracleScene {
    pub state: PolarStateMap,
}

/// Draws one random scene. Draw order from `rng` is part of the determinism
/// contract: center (x, y), radius fraction, aspect, refractive index,
/// albedo, ambient, then the three light components.
pub fn generate_scene(rng: &mut ChaCha8Rng, patch: usize) -> Result<OracleScene> {
    if patch < 4 {
        return Err(Error::Precondition(format!("scene patch must be at least 4, got {patch}")));
    }
    let half = (patch as f64 - 1.0) / 2.0;
    let cx = half + rng.gen_range(-1.0..1.0);
    let cy = half + rng.gen_range(-1.0..1.0);
    let radius = rng.gen_range(0.75..0.90) * patch as f64 / 2.0;
    let aspect = rng.gen_range(0.9..1.1);
    let eta = rng.gen_range(1.3..1.8);
    let albedo = rng.gen_range(0.4..0.9);
    let ambient = rng.gen_range(0.05..0.10);
    let lx: f64 = rng.sample(StandardNormal);
    let ly: f64 = rng.sample(StandardNormal);
    let lz: f64 = rng.sample::<f64, _>(StandardNormal).abs() + 0.5;

    let normals = make_ellipsoid(patch, cx, cy, radius * aspect, radius / aspect)?;
    let material = Material { eta, mode: ReflectionMode::Diffuse, albedo };
    let light = SceneLight::from_direction([lx, ly, lz], ambient)?;
    let state = render_polar(&normals, &material, &light)?;
    Ok(OracleScene { state })
}

/// Generates `n_train + n_test` scenes from one seeded stream and splits them
/// in draw order, so the split is deterministic and train/test never overlap.
pub fn build_dataset(
    n_train: usize,
    n_test: usize,
    patch: usize,
    seed: u64,
) -> Result<(Vec<OracleScene>, Vec<OracleScene>)> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(n_train);
    for _ in 0..n_train {
        train.push(generate_scene(&mut rng, patch)?);
    }
    let mut test = Vec::with_capacity(n_test);
    for _ in 0..n_test {
        test.push(generate_scene(&mut rng, patch)?);
    }
    Ok((train, test))
}
