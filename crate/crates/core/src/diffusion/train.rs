//! Forward diffusion, the ε-prediction objective, and the training loop.

use crate::diffusion::adamw::AdamW;
use crate::diffusion::data::OracleScene;
use crate::diffusion::model::{DiffusionModel, ModelConfig};
use crate::diffusion::repr::{condition_tensor, encode_target, TargetRepresentation};
use crate::diffusion::schedule::NoiseSchedule;
use crate::diffusion::tensor::Tensor;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Training hyperparameters. Optimizer moments and decay follow the
/// reference recipe; the remaining knobs are sized for the toy budget.
#[derive(Debug, Clone)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    /// Side length of the (square, even) condition patch.
    pub patch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            steps: 1000,
            seed: 1,
            patch_size: 16,
            beta1: 0.9,
            beta2: 0.999,
            weight_decay: 1e-3,
        }
    }
}

impl TrainingConfig {
    /// Zero is accepted as the degenerate "evaluate without learning" rate;
    /// negative rates are rejected.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Precondition(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Precondition("batch size must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::Precondition("step count must be at least 1".into()));
        }
        if self.patch_size < 4 || self.patch_size % 2 != 0 {
            return Err(Error::Precondition(format!(
                "patch size must be even and at least 4, got {}",
                self.patch_size
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Precondition(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Precondition("weight decay must be non-negative".into()));
        }
        Ok(())
    }
}

/// Closed-form forward process: `z_t = √ᾱ_t·z0 + √(1−ᾱ_t)·noise`.
pub fn forward_diffuse(
    z0: &Tensor,
    t: usize,
    noise: &Tensor,
    schedule: &NoiseSchedule,
) -> Result<Tensor> {
    schedule.check_t(t)?;
    if z0.shape() != noise.shape() {
        return Err(Error::Dimension("noise tensor must match the target shape".into()));
    }
    let ab = schedule.alpha_bar(t);
    let (sa, sn) = (ab.sqrt(), (1.0 - ab).sqrt());
    let data = z0.data().iter().zip(noise.data()).map(|(z, n)| sa * z + sn * n).collect();
    let [n, c, h, w] = z0.shape();
    Tensor::new(n, c, h, w, data)
}

/// Mean squared error between prediction and target over all elements.
fn mse(pred: &Tensor, target: &Tensor) -> f64 {
    let mut sum = crate::metrics::KahanSum::default();
    for (p, t) in pred.data().iter().zip(target.data()) {
        let d = p - t;
        sum.add(d * d);
    }
    sum.value() / pred.numel() as f64
}

fn check_batch_shapes(cond: &Tensor, z0: &Tensor, ts: &[usize], noise: &Tensor) -> Result<()> {
    if z0.shape() != noise.shape() {
        return Err(Error::Dimension("noise must match the target tensor shape".into()));
    }
    if ts.len() != z0.batch() || cond.batch() != z0.batch() {
        return Err(Error::Dimension(
            "condition, target and timestep batch sizes must agree".into(),
        ));
    }
    Ok(())
}

/// Diffuses each batch item to its own timestep and returns the mean squared
/// ε-prediction error. Forward only; see [`loss_and_gradients`] for the
/// differentiated version.
pub fn training_loss(
    model: &DiffusionModel,
    cond: &Tensor,
    z0: &Tensor,
    ts: &[usize],
    noise: &Tensor,
    schedule: &NoiseSchedule,
) -> Result<f64> {
    check_batch_shapes(cond, z0, ts, noise)?;
    let zt = diffuse_batch(z0, ts, noise, schedule)?;
    let pred = model.predict_noise(&zt, ts, cond)?;
    Ok(mse(&pred, noise))
}

/// Per-item forward diffusion with one timestep per batch element.
fn diffuse_batch(z0: &Tensor, ts: &[usize], noise: &Tensor, schedule: &NoiseSchedule) -> Result<Tensor> {
    let [n, c, h, w] = z0.shape();
    let stride = c * h * w;
    let mut data = vec![0.0; n * stride];
    for (b, &t) in ts.iter().enumerate() {
        schedule.check_t(t)?;
        let ab = schedule.alpha_bar(t);
        let (sa, sn) = (ab.sqrt(), (1.0 - ab).sqrt());
        for i in 0..stride {
            let j = b * stride + i;
            data[j] = sa * z0.data()[j] + sn * noise.data()[j];
        }
    }
    Tensor::new(n, c, h, w, data)
}

/// Computes the loss and accumulates its gradient into every parameter.
/// Callers zero gradients first.
pub fn loss_and_gradients(
    model: &mut DiffusionModel,
    cond: &Tensor,
    z0: &Tensor,
    ts: &[usize],
    noise: &Tensor,
    schedule: &NoiseSchedule,
) -> Result<f64> {
    check_batch_shapes(cond, z0, ts, noise)?;
    let zt = diffuse_batch(z0, ts, noise, schedule)?;
    let (pred, cache) = model.forward_train(&zt, ts, cond)?;
    let loss = mse(&pred, noise);
    // dL/dpred = 2·(pred − ε)/numel.
    let scale = 2.0 / pred.numel() as f64;
    let [n, c, h, w] = pred.shape();
    let dout = Tensor::new(
        n,
        c,
        h,
        w,
        pred.data().iter().zip(noise.data()).map(|(p, e)| scale * (p - e)).collect(),
    )?;
    model.backward_train(&dout, &cache);
    Ok(loss)
}

/// A finished training run: the model, the schedule it was trained against,
/// and the per-step loss curve.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: DiffusionModel,
    pub schedule: NoiseSchedule,
    pub loss_curve: Vec<f64>,
}

impl TrainOutcome {
    /// Mean loss over the first 5% of steps (at least one step).
    pub fn initial_loss(&self) -> f64 {
        let n = (self.loss_curve.len() / 20).max(1);
        self.loss_curve[..n].iter().sum::<f64>() / n as f64
    }

    /// Mean loss over the final 10% of steps (at least one step).
    pub fn final_loss(&self) -> f64 {
        let n = (self.loss_curve.len() / 10).max(1);
        let start = self.loss_curve.len() - n;
        self.loss_curve[start..].iter().sum::<f64>() / n as f64
    }
}

/// Trains an ε-predictor on the given scenes. Deterministic for a fixed
/// config: model initialization, batch selection, timesteps and noise are all
/// derived from `config.seed`.
pub fn train(
    dataset: &[OracleScene],
    config: &TrainingConfig,
    representation: TargetRepresentation,
) -> Result<TrainOutcome> {
    train_with_progress(dataset, config, representation, &mut |_, _| {})
}

/// [`train`] with a per-step observer `(step_index, loss)` for long runs.
pub fn train_with_progress(
    dataset: &[OracleScene],
    config: &TrainingConfig,
    representation: TargetRepresentation,
    progress: &mut dyn FnMut(usize, f64),
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Precondition("training dataset must be nonempty".into()));
    }
    for scene in dataset {
        if scene.state.width() != config.patch_size || scene.state.height() != config.patch_size {
            return Err(Error::Dimension(format!(
                "scene is {}x{}, config expects {}x{} patches",
                scene.state.width(),
                scene.state.height(),
                config.patch_size,
                config.patch_size
            )));
        }
    }
    let schedule = NoiseSchedule::default_toy();
    let mut model = DiffusionModel::new(ModelConfig::new(representation), config.seed)?;

    // Precompute per-scene condition and target tensors once.
    let conds: Vec<Tensor> =
        dataset.iter().map(|s| condition_tensor(&s.state.s0)).collect::<Result<_>>()?;
    let targets: Vec<Tensor> =
        dataset.iter().map(|s| encode_target(&s.state, representation)).collect::<Result<_>>()?;

    // The training stream lives on its own ChaCha stream so it cannot alias
    // the initialization draws made from the same seed.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    let mut optimizer = AdamW::new(config.learning_rate, config.weight_decay);
    optimizer.beta1 = config.beta1;
    optimizer.beta2 = config.beta2;

    let t_max = schedule.t_count();
    let mut loss_curve = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        // Fixed draw order per step: indices, then timesteps, then noise.
        let idx: Vec<usize> =
            (0..config.batch_size).map(|_| rng.gen_range(0..dataset.len())).collect();
        let ts: Vec<usize> = (0..config.batch_size).map(|_| rng.gen_range(1..=t_max)).collect();
        let z0 = Tensor::stack(&idx.iter().map(|&i| targets[i].clone()).collect::<Vec<_>>())?;
        let cond = Tensor::stack(&idx.iter().map(|&i| conds[i].clone()).collect::<Vec<_>>())?;
        let mut noise = Tensor::zeros(z0.batch(), z0.channels(), z0.height(), z0.width());
        for v in noise.data_mut() {
            *v = rng.sample(StandardNormal);
        }
        model.zero_grads();
        let loss = loss_and_gradients(&mut model, &cond, &z0, &ts, &noise, &schedule)?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!(
                "training diverged at step {step}: loss is {loss}"
            )));
        }
        optimizer.step(&mut model);
        loss_curve.push(loss);
        progress(step, loss);
    }
    Ok(TrainOutcome { model, schedule, loss_curve })
}
