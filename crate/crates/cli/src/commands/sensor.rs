//! `mosaic` and `demosaic`: through the focal-plane sensor and back.

use std::path::Path;
use std::str::FromStr;

use polar_core::error::{Error, Result};
use polar_core::image::LUMA_WEIGHTS;
use polar_core::mosaic::{
    apply_noise, demosaic as demosaic_frame, mosaic as mosaic_stack, BitDepth, MosaicPattern,
    SensorNoiseModel,
};

use crate::commands::echo;
use crate::scene::{self, SceneDirectory, SceneLayout, SceneMeta};

fn depth_label(depth: BitDepth) -> String {
    match depth.bits() {
        Some(bits) => bits.to_string(),
        None => "none".to_string(),
    }
}

pub fn mosaic(
    scene_path: &Path,
    out: &Path,
    pattern: Option<&str>,
    read_sigma: f64,
    shot_gain: f64,
    bitdepth: BitDepth,
    seed: u64,
) -> Result<()> {
    let scene = SceneDirectory::open(scene_path)?;
    if scene.layout == SceneLayout::Mosaic {
        return Err(Error::Precondition(format!(
            "{} is already a mosaic frame",
            scene_path.display()
        )));
    }
    let stack = scene.stack()?.to_grayscale(LUMA_WEIGHTS);
    let pattern = match pattern {
        Some(text) => MosaicPattern::from_str(text)?,
        None => scene.meta.pattern.unwrap_or_default(),
    };
    echo(
        "mosaic",
        seed,
        &[
            ("scene", scene_path.display().to_string()),
            ("out", out.display().to_string()),
            ("pattern", pattern.to_string()),
            ("read_sigma", read_sigma.to_string()),
            ("shot_gain", shot_gain.to_string()),
            ("bitdepth", depth_label(bitdepth)),
        ],
    );

    let mut frame = mosaic_stack(&stack, pattern)?;
    let noisy = read_sigma > 0.0 || shot_gain > 0.0 || bitdepth != BitDepth::None;
    if noisy {
        let model = SensorNoiseModel { read_sigma, shot_gain, bit_depth: bitdepth, seed };
        frame = apply_noise(&frame, &model)?;
    }
    let meta = SceneMeta {
        peak: scene.meta.peak,
        bitdepth: (bitdepth != BitDepth::None).then_some(bitdepth),
        seed: noisy.then_some(seed),
        ..SceneMeta::default()
    };
    scene::write_mosaic(out, &frame, &meta)
}

pub fn demosaic(scene_path: &Path, out: &Path, seed: u64) -> Result<()> {
    let scene = SceneDirectory::open(scene_path)?;
    let frame = scene.read_mosaic()?;
    echo(
        "demosaic",
        seed,
        &[
            ("scene", scene_path.display().to_string()),
            ("out", out.display().to_string()),
            ("pattern", frame.pattern().to_string()),
        ],
    );
    let stack = demosaic_frame(&frame)?;
    scene::write_stack(out, &stack, &scene.meta)
}
