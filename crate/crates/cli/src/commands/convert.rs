//! `decompose` and `synthesize`: moving between analyzer images and
//! property maps.

use std::path::Path;

use polar_core::error::Result;
use polar_core::image::LUMA_WEIGHTS;
use polar_core::stokes::{decompose_stack, malus_intensity, synthesize_stack};

use crate::commands::echo;
use crate::io::pfm::{write_pfm, PfmImage};
use crate::scene::{self, SceneDirectory, SceneMeta};

pub fn decompose(scene_path: &Path, out: &Path, seed: u64) -> Result<()> {
    let scene = SceneDirectory::open(scene_path)?;
    let stack = scene.read_stack()?;
    let color = stack.channels() == 3;
    let stack = if color { stack.to_grayscale(LUMA_WEIGHTS) } else { stack };
    let state = decompose_stack(&stack)?;

    let weights_label = if color {
        format!("{},{},{}", LUMA_WEIGHTS[0], LUMA_WEIGHTS[1], LUMA_WEIGHTS[2])
    } else {
        "none".to_string()
    };
    echo(
        "decompose",
        seed,
        &[
            ("scene", scene_path.display().to_string()),
            ("out", out.display().to_string()),
            ("gray_weights", weights_label),
        ],
    );

    let meta = SceneMeta {
        peak: scene.meta.peak,
        gray_weights: color.then_some(LUMA_WEIGHTS),
        ..SceneMeta::default()
    };
    scene::write_state(out, &state, &meta)?;

    let minmax = |data: &[f64]| {
        data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
    };
    let (s0_min, s0_max) = minmax(state.s0.data());
    let (dolp_min, dolp_max) = minmax(state.dolp.data());
    let frac = state.valid.count() as f64 / (state.width() * state.height()) as f64;
    println!("s0_min={s0_min}");
    println!("s0_max={s0_max}");
    println!("dolp_min={dolp_min}");
    println!("dolp_max={dolp_max}");
    println!("valid_fraction={frac}");
    Ok(())
}

pub fn synthesize_angle(scene_path: &Path, out: &Path, degrees: f64, seed: u64) -> Result<()> {
    let scene = SceneDirectory::open(scene_path)?;
    let state = scene.read_state()?;
    let normalized = degrees.rem_euclid(180.0);
    if normalized != degrees {
        eprintln!("warning: analyzer angle {degrees} normalized to {normalized} degrees");
    }
    echo(
        "synthesize",
        seed,
        &[
            ("scene", scene_path.display().to_string()),
            ("out", out.display().to_string()),
            ("angle", normalized.to_string()),
        ],
    );
    let image = malus_intensity(&state, normalized.to_radians())?;
    std::fs::create_dir_all(out)
        .map_err(|e| polar_core::error::Error::Io(format!("{}: {e}", out.display())))?;
    write_pfm(&out.join(format!("I{normalized}.pfm")), &PfmImage::from_radiance(&image))
}

pub fn synthesize_full(scene_path: &Path, out: &Path, seed: u64) -> Result<()> {
    let scene = SceneDirectory::open(scene_path)?;
    let state = scene.read_state()?;
    echo(
        "synthesize",
        seed,
        &[
            ("scene", scene_path.display().to_string()),
            ("out", out.display().to_string()),
            ("angle", "stack".to_string()),
        ],
    );
    let stack = synthesize_stack(&state)?;
    let meta = SceneMeta { peak: scene.meta.peak, ..SceneMeta::default() };
    scene::write_stack(out, &stack, &meta)
}
