//! `train` and `sample`: fitting the conditional denoiser and drawing
//! property maps from it.

use std::path::Path;

use polar_core::diffusion::{
    build_dataset, condition_tensor, decode_representation, load_checkpoint, sample as draw,
    save_checkpoint, train_with_progress, Checkpoint, TargetRepresentation, TrainingConfig,
};
use polar_core::error::{Error, Result};
use polar_core::image::LUMA_WEIGHTS;

use crate::commands::echo;
use crate::scene::{self, SceneDirectory, SceneMeta};

#[allow(clippy::too_many_arguments)]
pub fn train(
    out: &Path,
    representation: TargetRepresentation,
    steps: usize,
    batch_size: usize,
    learning_rate: f64,
    train_scenes: usize,
    patch_size: usize,
    seed: u64,
) -> Result<()> {
    let config = TrainingConfig {
        learning_rate,
        batch_size,
        steps,
        seed,
        patch_size,
        ..TrainingConfig::default()
    };
    echo(
        "train",
        seed,
        &[
            ("out", out.display().to_string()),
            ("representation", representation.to_string()),
            ("steps", steps.to_string()),
            ("batch_size", batch_size.to_string()),
            ("learning_rate", learning_rate.to_string()),
            ("train_scenes", train_scenes.to_string()),
            ("patch_size", patch_size.to_string()),
            ("weight_decay", config.weight_decay.to_string()),
        ],
    );

    let (dataset, _) = build_dataset(train_scenes, 0, patch_size, seed)?;
    let report_every = (steps / 10).max(1);
    let mut progress = |step: usize, loss: f64| {
        if (step + 1) % report_every == 0 || step + 1 == steps {
            eprintln!("step {}/{} loss={loss:.4}", step + 1, steps);
        }
    };
    let outcome = train_with_progress(&dataset, &config, representation, &mut progress)?;

    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| Error::Io(format!("{}: {e}", parent.display())))?;
    }
    let checkpoint =
        Checkpoint { model: outcome.model.clone(), schedule: outcome.schedule.clone(), patch_size };
    save_checkpoint(out, &checkpoint)?;
    println!("initial_loss={:.6}", outcome.initial_loss());
    println!("final_loss={:.6}", outcome.final_loss());
    Ok(())
}

pub fn sample(checkpoint_path: &Path, scene_path: &Path, out: &Path, seed: u64) -> Result<()> {
    let checkpoint = load_checkpoint(checkpoint_path)?;
    let scene = SceneDirectory::open(scene_path)?;
    let state = scene.read_state()?;
    let s0 = state.s0.to_grayscale(LUMA_WEIGHTS);

    echo(
        "sample",
        seed,
        &[
            ("checkpoint", checkpoint_path.display().to_string()),
            ("scene", scene_path.display().to_string()),
            ("out", out.display().to_string()),
            ("representation", checkpoint.model.config.representation.to_string()),
            ("size", format!("{}x{}", s0.width(), s0.height())),
        ],
    );

    let cond = condition_tensor(&s0)?;
    let tensor = draw(&checkpoint.model, &cond, &checkpoint.schedule, seed)?;
    let estimate = decode_representation(&tensor, checkpoint.model.config.representation, &s0)?;
    let meta = SceneMeta { seed: Some(seed), ..SceneMeta::default() };
    scene::write_state(out, &estimate, &meta)
}
