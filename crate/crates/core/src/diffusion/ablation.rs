//! Equal-budget comparison of the three target representations.
//!
//! For every (representation, seed) pair the harness regenerates the same
//! train/test scenes, trains an identically sized model with an identical
//! budget, samples every test condition, decodes, and scores the result with
//! the shared metric suite — so any difference in the table is attributable
//! to the representation alone. An untrained encoded baseline anchors the
//! chance level, and per-representation medians across seeds summarize the
//! table.

use crate::diffusion::data::build_dataset;
use crate::diffusion::model::{DiffusionModel, ModelConfig};
use crate::diffusion::repr::{condition_tensor, decode_representation, TargetRepresentation};
use crate::diffusion::sample::sample;
use crate::diffusion::schedule::NoiseSchedule;
use crate::diffusion::train::{train_with_progress, TrainingConfig};
use crate::error::{Error, Result};
use crate::image::Mask;
use crate::metrics::{mabse, mange, psnr, ssim};
use crate::stokes::synthesize_stack;

/// Budget and evaluation knobs for one full ablation.
#[derive(Debug, Clone)]
pub struct AblationConfig {
    /// One independent run per seed; medians are taken across them.
    pub seeds: Vec<u64>,
    pub train_scenes: usize,
    pub test_scenes: usize,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patch_size: usize,
    /// Pixels with |Φ| above this (degrees) count as wrap-boundary pixels.
    pub wrap_threshold_deg: f64,
}

impl Default for AblationConfig {
    /// Budget sized so all nine runs plus the baseline finish within half an
    /// hour on one desktop core while leaving the representation gaps far
    /// above seed noise.
    fn default() -> Self {
        Self {
            seeds: vec![1, 2, 3],
            train_scenes: 512,
            test_scenes: 16,
            steps: 800,
            batch_size: 32,
            learning_rate: 1e-3,
            patch_size: 16,
            wrap_threshold_deg: 80.0,
        }
    }
}

impl AblationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Precondition("ablation needs at least one seed".into()));
        }
        if self.train_scenes == 0 || self.test_scenes == 0 {
            return Err(Error::Precondition("train and test scene counts must be positive".into()));
        }
        if self.patch_size < 12 || self.patch_size % 2 != 0 {
            return Err(Error::Precondition(format!(
                "patch size must be even and at least 12 (the SSIM window needs 11), got {}",
                self.patch_size
            )));
        }
        if !(0.0..90.0).contains(&self.wrap_threshold_deg) {
            return Err(Error::Precondition(format!(
                "wrap threshold must lie in [0, 90) degrees, got {}",
                self.wrap_threshold_deg
            )));
        }
        Ok(())
    }

    fn training_config(&self, seed: u64) -> TrainingConfig {
        TrainingConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            steps: self.steps,
            seed,
            patch_size: self.patch_size,
            ..TrainingConfig::default()
        }
    }

    /// The controlled-variable record: everything shared across the runs.
    pub fn echo(&self) -> String {
        let schedule = NoiseSchedule::default_toy();
        let model = ModelConfig::new(TargetRepresentation::EncodedAolpDolp);
        format!(
            "seeds={}\ntrain_scenes={}\ntest_scenes={}\nsteps={}\nbatch_size={}\n\
             learning_rate={}\npatch_size={}\nwidth={}\ntime_embed_dim={}\n\
             schedule_t={}\nbeta_start={}\nbeta_end={}\nwrap_threshold_deg={}\n",
            self.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","),
            self.train_scenes,
            self.test_scenes,
            self.steps,
            self.batch_size,
            self.learning_rate,
            self.patch_size,
            model.width,
            model.time_embed_dim,
            schedule.t_count(),
            schedule.beta(1),
            schedule.beta(schedule.t_count()),
            self.wrap_threshold_deg,
        )
    }
}

/// Scores for one model on one test split; scene-level metrics averaged over
/// the test scenes.
#[derive(Debug, Clone)]
pub struct RepresentationMetrics {
    /// Mean angular AoLP error, degrees, over jointly valid pixels.
    pub mange_deg: f64,
    /// Mean absolute DoLP error over jointly valid pixels.
    pub mabse: f64,
    /// PSNR (dB) of re-synthesized analyzer images, mean over angles/scenes.
    pub psnr_mean: f64,
    /// SSIM of re-synthesized analyzer images, mean over angles/scenes.
    pub ssim_mean: f64,
    /// MAngE restricted to wrap-boundary pixels; absent when no test pixel
    /// crosses the threshold.
    pub wrap_mange_deg: Option<f64>,
    /// Mean loss over the first 5% of training steps (absent for untrained).
    pub initial_loss: Option<f64>,
    /// Mean loss over the final 10% of training steps (absent for untrained).
    pub final_loss: Option<f64>,
}

/// One trained model's row in the table.
#[derive(Debug, Clone)]
pub struct AblationRun {
    pub representation: TargetRepresentation,
    pub seed: u64,
    pub metrics: RepresentationMetrics,
}

/// Full ablation output.
#[derive(Debug, Clone)]
pub struct AblationTable {
    /// Per-(representation, seed) results in run order.
    pub runs: Vec<AblationRun>,
    /// Component-wise medians across seeds, one entry per representation.
    pub medians: Vec<(TargetRepresentation, RepresentationMetrics)>,
    /// Chance-level anchor: untrained encoded model on the first seed.
    pub untrained: RepresentationMetrics,
    pub untrained_seed: u64,
    /// key=value block of everything held constant across runs.
    pub config_echo: String,
}

fn fmt_metric(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.6}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), fmt_metric)
}

impl AblationTable {
    pub fn median_for(&self, repr: TargetRepresentation) -> Option<&RepresentationMetrics> {
        self.medians.iter().find(|(r, _)| *r == repr).map(|(_, m)| m)
    }

    /// CSV with the shared configuration echoed as `#` comment lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in self.config_echo.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(
            "representation,seed,mange_deg,mabse,psnr_mean,ssim_mean,wrap_mange_deg,initial_loss,final_loss\n",
        );
        let mut row = |repr: &str, seed: &str, m: &RepresentationMetrics| {
            out.push_str(&format!(
                "{repr},{seed},{},{},{},{},{},{},{}\n",
                fmt_metric(m.mange_deg),
                fmt_metric(m.mabse),
                fmt_metric(m.psnr_mean),
                fmt_metric(m.ssim_mean),
                fmt_opt(m.wrap_mange_deg),
                fmt_opt(m.initial_loss),
                fmt_opt(m.final_loss),
            ));
        };
        for run in &self.runs {
            row(run.representation.label(), &run.seed.to_string(), &run.metrics);
        }
        for (repr, m) in &self.medians {
            row(repr.label(), "median", m);
        }
        row("encoded", "untrained", &self.untrained);
        out
    }
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("metric values are comparable"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn median_metrics(runs: &[&RepresentationMetrics]) -> RepresentationMetrics {
    let collect = |f: fn(&RepresentationMetrics) -> f64| median(runs.iter().map(|m| f(m)).collect());
    let wrap: Vec<f64> = runs.iter().filter_map(|m| m.wrap_mange_deg).collect();
    let init: Vec<f64> = runs.iter().filter_map(|m| m.initial_loss).collect();
    let fin: Vec<f64> = runs.iter().filter_map(|m| m.final_loss).collect();
    RepresentationMetrics {
        mange_deg: collect(|m| m.mange_deg),
        mabse: collect(|m| m.mabse),
        psnr_mean: collect(|m| m.psnr_mean),
        ssim_mean: collect(|m| m.ssim_mean),
        wrap_mange_deg: if wrap.is_empty() { None } else { Some(median(wrap)) },
        initial_loss: if init.is_empty() { None } else { Some(median(init)) },
        final_loss: if fin.is_empty() { None } else { Some(median(fin)) },
    }
}

/// Samples every test scene and scores the decoded states and re-synthesized
/// analyzer stacks. `run_seed` derives the per-scene sampling seeds.
fn evaluate_model(
    model: &DiffusionModel,
    test: &[crate::diffusion::data::OracleScene],
    schedule: &NoiseSchedule,
    run_seed: u64,
    wrap_threshold_deg: f64,
) -> Result<RepresentationMetrics> {
    let repr = model.config.representation;
    let wrap_rad = wrap_threshold_deg.to_radians();
    let mut mange_scores = Vec::new();
    let mut mabse_scores = Vec::new();
    let mut wrap_scores = Vec::new();
    let mut psnr_scores = Vec::new();
    let mut ssim_scores = Vec::new();
    for (i, scene) in test.iter().enumerate() {
        let gt = &scene.state;
        let cond = condition_tensor(&gt.s0)?;
        let out = sample(model, &cond, schedule, run_seed * 1000 + i as u64)?;
        let est = decode_representation(&out, repr, &gt.s0)?;

        let joint = est.valid.and(&gt.valid)?;
        if joint.count() > 0 {
            mange_scores.push(mange(&gt.aolp, &est.aolp, &joint)?);
            mabse_scores.push(mabse(&gt.dolp, &est.dolp, &joint)?);
            let wrap_data: Vec<bool> = joint
                .data()
                .iter()
                .zip(gt.aolp.data())
                .map(|(ok, phi)| *ok && phi.abs() > wrap_rad)
                .collect();
            let wrap_mask = Mask::new(gt.width(), gt.height(), wrap_data)?;
            if wrap_mask.count() > 0 {
                wrap_scores.push(mange(&gt.aolp, &est.aolp, &wrap_mask)?);
            }
        }

        let est_stack = synthesize_stack(&est)?;
        let gt_stack = synthesize_stack(gt)?;
        for (e, g) in est_stack.images().into_iter().zip(gt_stack.images()) {
            psnr_scores.push(psnr(e, g, 1.0, None)?);
            ssim_scores.push(ssim(e, g, 1.0)?);
        }
    }
    if mange_scores.is_empty() {
        return Err(Error::Numerical(
            "no test scene produced jointly valid pixels; cannot score the run".into(),
        ));
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    Ok(RepresentationMetrics {
        mange_deg: mean(&mange_scores),
        mabse: mean(&mabse_scores),
        psnr_mean: mean(&psnr_scores),
        ssim_mean: mean(&ssim_scores),
        wrap_mange_deg: if wrap_scores.is_empty() { None } else { Some(mean(&wrap_scores)) },
        initial_loss: None,
        final_loss: None,
    })
}

/// Runs the full comparison: every representation × every seed, plus the
/// untrained baseline. `progress` receives human-readable status lines.
pub fn ablation_harness(
    config: &AblationConfig,
    progress: &mut dyn FnMut(&str),
) -> Result<AblationTable> {
    config.validate()?;
    let mut runs = Vec::new();
    for repr in TargetRepresentation::ALL {
        for &seed in &config.seeds {
            let (train_set, test_set) =
                build_dataset(config.train_scenes, config.test_scenes, config.patch_size, seed)?;
            progress(&format!(
                "training representation={repr} seed={seed} ({} scenes, {} steps)",
                train_set.len(),
                config.steps
            ));
            let tc = config.training_config(seed);
            let report_every = (config.steps / 10).max(1);
            let outcome = train_with_progress(&train_set, &tc, repr, &mut |step, loss| {
                if (step + 1) % report_every == 0 {
                    progress(&format!(
                        "  representation={repr} seed={seed} step={}/{} loss={loss:.4}",
                        step + 1,
                        config.steps
                    ));
                }
            })?;
            progress(&format!("evaluating representation={repr} seed={seed}"));
            let mut metrics = evaluate_model(
                &outcome.model,
                &test_set,
                &outcome.schedule,
                seed,
                config.wrap_threshold_deg,
            )?;
            metrics.initial_loss = Some(outcome.initial_loss());
            metrics.final_loss = Some(outcome.final_loss());
            runs.push(AblationRun { representation: repr, seed, metrics });
        }
    }

    let medians = TargetRepresentation::ALL
        .into_iter()
        .map(|repr| {
            let per_seed: Vec<&RepresentationMetrics> = runs
                .iter()
                .filter(|r| r.representation == repr)
                .map(|r| &r.metrics)
                .collect();
            (repr, median_metrics(&per_seed))
        })
        .collect();

    // Chance-level anchor: same test scenes and sampling seeds as the first
    // encoded run, but with the freshly initialized (zero-head) model.
    let baseline_seed = config.seeds[0];
    progress(&format!("evaluating untrained encoded baseline seed={baseline_seed}"));
    let (_, test_set) =
        build_dataset(config.train_scenes, config.test_scenes, config.patch_size, baseline_seed)?;
    let untrained_model = DiffusionModel::new(
        ModelConfig::new(TargetRepresentation::EncodedAolpDolp),
        baseline_seed,
    )?;
    let untrained = evaluate_model(
        &untrained_model,
        &test_set,
        &NoiseSchedule::default_toy(),
        baseline_seed,
        config.wrap_threshold_deg,
    )?;

    Ok(AblationTable {
        runs,
        medians,
        untrained,
        untrained_seed: baseline_seed,
        config_echo: config.echo(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even_sets() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(vec![7.0]), 7.0);
    }

    #[test]
    fn config_validation() {
        assert!(AblationConfig::default().validate().is_ok());
        assert!(AblationConfig { seeds: vec![], ..Default::default() }.validate().is_err());
        assert!(AblationConfig { patch_size: 10, ..Default::default() }.validate().is_err());
        assert!(AblationConfig { patch_size: 13, ..Default::default() }.validate().is_err());
        assert!(AblationConfig { test_scenes: 0, ..Default::default() }.validate().is_err());
        assert!(
            AblationConfig { wrap_threshold_deg: 95.0, ..Default::default() }.validate().is_err()
        );
    }

    #[test]
    fn smoke_run_produces_complete_deterministic_table() {
        // Minimal budget: checks plumbing, table shape and determinism, not
        // model quality (the full-budget ordering is an acceptance check).
        let config = AblationConfig {
            seeds: vec![1],
            train_scenes: 8,
            test_scenes: 2,
            steps: 2,
            batch_size: 4,
            ..Default::default()
        };
        let mut messages = Vec::new();
        let table = ablation_harness(&config, &mut |m| messages.push(m.to_string())).unwrap();
        assert_eq!(table.runs.len(), 3);
        assert_eq!(table.medians.len(), 3);
        assert!(messages.iter().any(|m| m.contains("representation=encoded")));
        for run in &table.runs {
            let m = &run.metrics;
            assert!(m.mange_deg.is_finite() && (0.0..=90.0).contains(&m.mange_deg));
            assert!((0.0..=1.0).contains(&m.mabse));
            assert!(m.ssim_mean.is_finite());
            assert!(m.initial_loss.is_some() && m.final_loss.is_some());
        }
        assert!(table.untrained.initial_loss.is_none());
        assert!((0.0..=90.0).contains(&table.untrained.mange_deg));

        let csv = table.to_csv();
        assert!(csv.contains("# seeds=1"));
        assert!(csv.contains("representation,seed,"));
        // 3 runs + 3 medians + 1 untrained row.
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 7);
        assert!(csv.contains("encoded,median,"));
        assert!(csv.contains("encoded,untrained,"));

        let table2 = ablation_harness(&config, &mut |_| {}).unwrap();
        assert_eq!(table2.to_csv(), csv);
    }
}
