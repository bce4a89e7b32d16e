//! `crop`: random even-aligned square patches from an angle-image scene.
//!
//! Origins snap to even coordinates so the 2x2 micro-polarizer phase is the
//! same in every patch.

use std::path::Path;

use polar_core::error::{Error, Result};
use polar_core::image::RadianceImage;
use polar_core::stokes::PolarizationStack;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commands::echo;
use crate::scene::{self, SceneDirectory, SceneMeta};

fn crop_image(img: &RadianceImage, x0: usize, y0: usize, size: usize) -> Result<RadianceImage> {
    let ch = img.channels();
    let mut data = Vec::with_capacity(size * size * ch);
    for y in y0..y0 + size {
        let row = (y * img.width() + x0) * ch;
        data.extend_from_slice(&img.data()[row..row + size * ch]);
    }
    RadianceImage::new(size, size, ch, data)
}

pub fn run(scene_path: &Path, out: &Path, size: usize, count: usize, seed: u64) -> Result<()> {
    let scene = SceneDirectory::open(scene_path)?;
    let stack = scene.read_stack()?;
    let (w, h) = (stack.width(), stack.height());
    if size < 2 || size % 2 != 0 {
        return Err(Error::Precondition(format!("patch size must be even and >= 2, got {size}")));
    }
    if size > w || size > h {
        return Err(Error::Precondition(format!(
            "patch size {size} exceeds the {w}x{h} source"
        )));
    }
    echo(
        "crop",
        seed,
        &[
            ("scene", scene_path.display().to_string()),
            ("out", out.display().to_string()),
            ("size", size.to_string()),
            ("count", count.to_string()),
        ],
    );

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..count {
        // Draw on the half-resolution grid, then scale back up: every origin
        // is even, and every even origin is reachable.
        let x0 = 2 * rng.gen_range(0..=(w - size) / 2);
        let y0 = 2 * rng.gen_range(0..=(h - size) / 2);
        let images = stack.images();
        let cropped = PolarizationStack::new(
            crop_image(images[0], x0, y0, size)?,
            crop_image(images[1], x0, y0, size)?,
            crop_image(images[2], x0, y0, size)?,
            crop_image(images[3], x0, y0, size)?,
        )?;
        let meta =
            SceneMeta { peak: scene.meta.peak, seed: Some(seed), ..SceneMeta::default() };
        let dir = out.join(format!("patch_{k:04}"));
        scene::write_stack(&dir, &cropped, &meta)?;
        println!("patch_{k:04}=({x0},{y0})");
    }
    Ok(())
}
