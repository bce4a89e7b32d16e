//! Subcommand definitions and dispatch.

mod ablate;
mod convert;
mod crop;
mod learn;
mod metrics;
mod oracle;
mod sensor;
mod visualize;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use polar_core::diffusion::TargetRepresentation;
use polar_core::error::{Error, Result};
use polar_core::mosaic::BitDepth;

#[derive(Debug, Parser)]
#[command(
    name = "polarcli",
    version,
    about = "Polarization imaging toolkit: analyzer-image synthesis and decomposition, \
             focal-plane mosaic simulation, analytic ground truth, quality metrics, and \
             a small conditional diffusion model"
)]
pub struct Cli {
    /// Seed for every randomized step; echoed so runs can be replayed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    Sphere,
    Ellipsoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Diffuse,
    Specular,
}

fn parse_vec3(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad component {p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    parts.try_into().map_err(|_| "expected three comma-separated numbers".to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split four analyzer images into s0 / AoLP / DoLP maps
    Decompose {
        /// Scene directory with I000/I045/I090/I135.pfm
        scene: PathBuf,
        /// Output scene directory for the property maps
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Render analyzer images from s0 / AoLP / DoLP maps
    Synthesize {
        /// Scene directory with s0/aolp/dolp.pfm
        scene: PathBuf,
        /// Output directory
        #[arg(short, long)]
        out: PathBuf,
        /// Analyzer angle in degrees (normalized modulo 180 with a warning)
        #[arg(long)]
        angle: Option<f64>,
        /// Emit all four canonical analyzer images instead
        #[arg(long)]
        stack: bool,
    },
    /// Cut random even-aligned square patches out of an angle-image scene
    Crop {
        scene: PathBuf,
        /// Directory receiving one subdirectory per patch
        #[arg(short, long)]
        out: PathBuf,
        /// Patch edge length (even)
        #[arg(long, default_value_t = 512)]
        size: usize,
        /// Number of patches
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Render analytic ground-truth polarization for a lit shape
    Oracle {
        /// Output scene directory for the property maps
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ShapeArg::Sphere)]
        shape: ShapeArg,
        /// Image edge length in pixels
        #[arg(long, default_value_t = 128)]
        resolution: usize,
        /// Refractive index
        #[arg(long, default_value_t = 1.5)]
        eta: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Diffuse)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0.8)]
        albedo: f64,
        /// Ambient intensity floor
        #[arg(long, default_value_t = 0.05)]
        ambient: f64,
        /// Light direction "x,y,z" (normalized internally)
        #[arg(long, value_parser = parse_vec3, default_value = "0.4,0.4,1.0")]
        light: [f64; 3],
        /// Shape radius as a fraction of the half image
        #[arg(long, default_value_t = 0.9)]
        radius_frac: f64,
        /// Ellipsoid x/y semi-axis ratio (ignored for spheres)
        #[arg(long, default_value_t = 1.2)]
        aspect: f64,
    },
    /// Sample a stack through the 2x2 micro-polarizer mosaic, with optional
    /// sensor noise and quantization
    Mosaic {
        scene: PathBuf,
        /// Output scene directory for the sensor frame
        #[arg(short, long)]
        out: PathBuf,
        /// Row-major superpixel layout "a,b,c,d" in degrees (default from the
        /// scene meta, else 90,45,135,0)
        #[arg(long)]
        pattern: Option<String>,
        /// Additive Gaussian read noise sigma (intensity units)
        #[arg(long, default_value_t = 0.0)]
        read_sigma: f64,
        /// Photon count at unit intensity (0 = no shot noise)
        #[arg(long, default_value_t = 0.0)]
        shot_gain: f64,
        /// Quantization depth: 8, 12, 16, or none
        #[arg(long, default_value = "none")]
        bitdepth: BitDepth,
    },
    /// Interpolate a mosaiced frame back to four analyzer images
    Demosaic {
        scene: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Compare a scene against a reference scene
    Metrics {
        /// Scene under test (any layout; reduced to a stack)
        scene: PathBuf,
        /// Reference scene
        reference: PathBuf,
        /// Also append a CSV row (with header when the file is new)
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Peak signal level (default: reference meta peak, else 1.0)
        #[arg(long)]
        peak: Option<f64>,
    },
    /// Train the conditional denoiser on oracle scenes
    Train {
        /// Checkpoint file to write
        #[arg(short, long)]
        out: PathBuf,
        /// Target representation: images4, raw, or encoded
        #[arg(long, default_value = "encoded")]
        representation: TargetRepresentation,
        #[arg(long, default_value_t = 800)]
        steps: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        learning_rate: f64,
        /// Number of rendered training scenes
        #[arg(long, default_value_t = 512)]
        train_scenes: usize,
        /// Training patch edge length (even)
        #[arg(long, default_value_t = 16)]
        patch_size: usize,
    },
    /// Sample property maps for a scene's intensity with a trained model
    Sample {
        /// Checkpoint written by `train`
        checkpoint: PathBuf,
        /// Scene providing the conditioning s0 map
        scene: PathBuf,
        /// Output scene directory for the sampled property maps
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Equal-budget comparison of the three target representations
    Ablate {
        /// CSV file to write
        #[arg(short, long)]
        out: PathBuf,
        /// One training run per seed; medians are reported across them
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        train_scenes: Option<usize>,
        #[arg(long)]
        test_scenes: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        patch_size: Option<usize>,
        /// Wrap-region threshold on |AoLP|, degrees
        #[arg(long)]
        wrap_threshold: Option<f64>,
    },
    /// Render AoLP as hue (angle doubled) and DoLP as grayscale
    Visualize {
        /// Scene directory with s0/aolp/dolp.pfm
        scene: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
}

pub fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed;
    match &cli.command {
        Command::Decompose { scene, out } => convert::decompose(scene, out, seed),
        Command::Synthesize { scene, out, angle, stack } => {
            match (angle, stack) {
                (Some(_), true) => Err(Error::Precondition(
                    "--angle and --stack are mutually exclusive".into(),
                )),
                (None, false) => {
                    Err(Error::Precondition("pass --angle <degrees> or --stack".into()))
                }
                (Some(deg), false) => convert::synthesize_angle(scene, out, *deg, seed),
                (None, true) => convert::synthesize_full(scene, out, seed),
            }
        }
        Command::Crop { scene, out, size, count } => crop::run(scene, out, *size, *count, seed),
        Command::Oracle {
            out,
            shape,
            resolution,
            eta,
            mode,
            albedo,
            ambient,
            light,
            radius_frac,
            aspect,
        } => oracle::run(
            out,
            &oracle::OracleParams {
                shape: *shape,
                resolution: *resolution,
                eta: *eta,
                mode: *mode,
                albedo: *albedo,
                ambient: *ambient,
                light: *light,
                radius_frac: *radius_frac,
                aspect: *aspect,
            },
            seed,
        ),
        Command::Mosaic { scene, out, pattern, read_sigma, shot_gain, bitdepth } => {
            sensor::mosaic(scene, out, pattern.as_deref(), *read_sigma, *shot_gain, *bitdepth, seed)
        }
        Command::Demosaic { scene, out } => sensor::demosaic(scene, out, seed),
        Command::Metrics { scene, reference, csv, peak } => {
            metrics::run(scene, reference, csv.as_deref(), *peak, seed)
        }
        Command::Train {
            out,
            representation,
            steps,
            batch_size,
            learning_rate,
            train_scenes,
            patch_size,
        } => learn::train(
            out,
            *representation,
            *steps,
            *batch_size,
            *learning_rate,
            *train_scenes,
            *patch_size,
            seed,
        ),
        Command::Sample { checkpoint, scene, out } => learn::sample(checkpoint, scene, out, seed),
        Command::Ablate {
            out,
            seeds,
            train_scenes,
            test_scenes,
            steps,
            batch_size,
            learning_rate,
            patch_size,
            wrap_threshold,
        } => {
            let mut config = polar_core::diffusion::AblationConfig::default();
            if let Some(s) = seeds {
                config.seeds = s.clone();
            }
            if let Some(v) = train_scenes {
                config.train_scenes = *v;
            }
            if let Some(v) = test_scenes {
                config.test_scenes = *v;
            }
            if let Some(v) = steps {
                config.steps = *v;
            }
            if let Some(v) = batch_size {
                config.batch_size = *v;
            }
            if let Some(v) = learning_rate {
                config.learning_rate = *v;
            }
            if let Some(v) = patch_size {
                config.patch_size = *v;
            }
            if let Some(v) = wrap_threshold {
                config.wrap_threshold_deg = *v;
            }
            ablate::run(out, &config, seed)
        }
        Command::Visualize { scene, out } => visualize::run(scene, out, seed),
    }
}

/// Prints the resolved configuration as `key=value` lines so any run can be
/// replayed from its output.
pub(crate) fn echo(command: &str, seed: u64, pairs: &[(&str, String)]) {
    println!("command={command}");
    println!("seed={seed}");
    for (key, value) in pairs {
        println!("{key}={value}");
    }
}
