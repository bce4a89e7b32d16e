//! `ablate`: equal-budget comparison of the three target representations.

use std::fs;
use std::path::Path;

use polar_core::diffusion::{ablation_harness, AblationConfig, TargetRepresentation};
use polar_core::error::{Error, Result};

use crate::commands::echo;

pub fn run(out: &Path, config: &AblationConfig, seed: u64) -> Result<()> {
    echo(
        "ablate",
        seed,
        &[("out", out.display().to_string())],
    );
    // The run grid is fully determined by the config; echo it the same way
    // the CSV header comment does.
    print!("{}", config.echo());

    let mut progress = |line: &str| eprintln!("{line}");
    let table = ablation_harness(config, &mut progress)?;

    fs::write(out, table.to_csv()).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;

    for (repr, metrics) in &table.medians {
        println!("median_mange_{repr}={:.4}", metrics.mange_deg);
    }
    println!("untrained_mange_encoded={:.4}", table.untrained.mange_deg);

    let get = |r| table.median_for(r).map(|m| m.mange_deg).unwrap_or(f64::NAN);
    let enc = get(TargetRepresentation::EncodedAolpDolp);
    let raw = get(TargetRepresentation::RawAolpDolp);
    let img = get(TargetRepresentation::PolarImages4);
    println!("ordering_encoded_le_raw={}", enc <= raw);
    println!("ordering_raw_le_images4={}", raw <= img);
    println!("trained_gain_deg={:.4}", table.untrained.mange_deg - enc);
    Ok(())
}
