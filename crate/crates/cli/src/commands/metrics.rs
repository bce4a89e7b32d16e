//! `metrics`: image- and polarization-domain comparison of two scenes.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use polar_core::error::{Error, Result};
use polar_core::image::LUMA_WEIGHTS;
use polar_core::metrics::MetricReport;
use polar_core::stokes::PolarizationStack;

use crate::commands::echo;
use crate::scene::SceneDirectory;

/// Reduces whichever stack is color so both sides compare single-channel.
fn harmonize(a: PolarizationStack, b: PolarizationStack) -> (PolarizationStack, PolarizationStack) {
    match (a.channels(), b.channels()) {
        (3, 1) => (a.to_grayscale(LUMA_WEIGHTS), b),
        (1, 3) => (a, b.to_grayscale(LUMA_WEIGHTS)),
        _ => (a, b),
    }
}

pub fn run(
    scene_path: &Path,
    reference_path: &Path,
    csv: Option<&Path>,
    peak: Option<f64>,
    seed: u64,
) -> Result<()> {
    let scene = SceneDirectory::open(scene_path)?;
    let reference = SceneDirectory::open(reference_path)?;
    let peak = peak.or(reference.meta.peak).unwrap_or(1.0);
    let (estimate, truth) = harmonize(scene.stack()?, reference.stack()?);

    echo(
        "metrics",
        seed,
        &[
            ("scene", scene_path.display().to_string()),
            ("reference", reference_path.display().to_string()),
            ("peak", peak.to_string()),
        ],
    );

    let report = MetricReport::from_stacks(&estimate, &truth, peak)?;
    print!("{}", report.to_key_value());

    if let Some(path) = csv {
        let fresh = !path.exists();
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut text = String::new();
        if fresh {
            text.push_str(MetricReport::csv_header());
            text.push('\n');
        }
        text.push_str(&report.to_csv_row());
        text.push('\n');
        file.write_all(text.as_bytes())
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
