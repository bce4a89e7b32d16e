//! The conditional ε-predictor: a condition encoder feeding a denoiser.
//!
//! Both halves are small stacks of shape-preserving 3×3 convolutions with
//! SiLU activations. The encoder sees the grayscale condition patch plus two
//! fixed coordinate channels — the azimuth field the model must reproduce is
//! position-dependent, and a purely translation-equivariant network cannot
//! express that, so the coordinates are load-bearing, not a flourish. The
//! denoiser consumes the noisy target concatenated with the condition
//! features and injects the timestep through learned per-channel biases; its
//! output head starts at zero so the initial prediction is exactly the zero
//! noise estimate.

use crate::diffusion::layers::{
    add_item_bias, item_bias_grad, silu_backward, silu_forward, time_embedding, Conv2d, Linear,
    LinearCache, Param,
};
use crate::diffusion::repr::TargetRepresentation;
use crate::diffusion::tensor::{FeatMatrix, Tensor};
use crate::error::{Error, Result};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Architecture hyperparameters. The model is fully convolutional, so patch
/// size is a property of the data, not of the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub representation: TargetRepresentation,
    /// Feature channels in every hidden layer.
    pub width: usize,
    /// Sinusoidal time-embedding dimension (even).
    pub time_embed_dim: usize,
}

impl ModelConfig {
    pub fn new(representation: TargetRepresentation) -> Self {
        Self { representation, width: 16, time_embed_dim: 16 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 2 {
            return Err(Error::Precondition(format!(
                "model width must be at least 2, got {}",
                self.width
            )));
        }
        if self.time_embed_dim < 2 || self.time_embed_dim % 2 != 0 {
            return Err(Error::Precondition(format!(
                "time embedding dimension must be even and >= 2, got {}",
                self.time_embed_dim
            )));
        }
        Ok(())
    }
}

/// Number of encoder input channels: the condition value plus x/y coordinate
/// ramps in `[−1, 1]`.
const COND_INPUT_CHANNELS: usize = 3;

/// Two convolutions over (condition, x, y) producing per-pixel guidance
/// features.
#[derive(Debug, Clone)]
pub struct CondEncoder {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
}

pub(crate) struct CondCache {
    conv1: crate::diffusion::layers::ConvCache,
    pre1: FeatMatrix,
    conv2: crate::diffusion::layers::ConvCache,
    pre2: FeatMatrix,
}

impl CondEncoder {
    fn new(width: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            conv1: Conv2d::new(COND_INPUT_CHANNELS, width, rng),
            conv2: Conv2d::new(width, width, rng),
        }
    }

    /// Builds the 3-channel encoder input: condition values plus coordinate
    /// ramps `x, y ∈ [−1, 1]` (top-left corner maps to (−1, −1)).
    fn input_features(cond: &Tensor) -> FeatMatrix {
        let [n, _, h, w] = cond.shape();
        let mut rows = Array2::zeros((n * h * w, COND_INPUT_CHANNELS));
        let out = rows.as_slice_mut().expect("contiguous");
        let src = cond.data();
        for b in 0..n {
            for y in 0..h {
                let yc = if h > 1 { -1.0 + 2.0 * y as f64 / (h - 1) as f64 } else { 0.0 };
                for x in 0..w {
                    let xc = if w > 1 { -1.0 + 2.0 * x as f64 / (w - 1) as f64 } else { 0.0 };
                    let r = (b * h + y) * w + x;
                    out[r * COND_INPUT_CHANNELS] = src[(b * h + y) * w + x];
                    out[r * COND_INPUT_CHANNELS + 1] = xc;
                    out[r * COND_INPUT_CHANNELS + 2] = yc;
                }
            }
        }
        FeatMatrix { rows, n, h, w }
    }

    pub(crate) fn forward(&self, cond: &Tensor) -> Result<(FeatMatrix, CondCache)> {
        if cond.channels() != 1 {
            return Err(Error::Dimension(format!(
                "condition tensor must have 1 channel, got {}",
                cond.channels()
            )));
        }
        let input = Self::input_features(cond);
        let (pre1, conv1) = self.conv1.forward(&input);
        let act1 = silu_forward(&pre1);
        let (pre2, conv2) = self.conv2.forward(&act1);
        let feat = silu_forward(&pre2);
        Ok((feat, CondCache { conv1, pre1, conv2, pre2 }))
    }

    pub(crate) fn backward(&mut self, dfeat: &FeatMatrix, cache: &CondCache) {
        let dpre2 = silu_backward(dfeat, &cache.pre2);
        let dact1 = self.conv2.backward(&dpre2, &cache.conv2);
        let dpre1 = silu_backward(&dact1, &cache.pre1);
        // The input is data, not parameters: its cotangent is dropped.
        let _ = self.conv1.backward(&dpre1, &cache.conv1);
    }
}

/// The ε-predictor: input convolution over (noisy target ⊕ condition
/// features), two time-conditioned middle convolutions, zero-initialized
/// output head.
#[derive(Debug, Clone)]
pub struct Denoiser {
    pub z_channels: usize,
    /// Grid targets are double the condition size; their features are
    /// nearest-upsampled before concatenation.
    pub upsample_condition: bool,
    pub conv_in: Conv2d,
    pub mid1: Conv2d,
    pub mid2: Conv2d,
    pub conv_out: Conv2d,
    pub time_bias1: Linear,
    pub time_bias2: Linear,
    time_embed_dim: usize,
}

pub(crate) struct DenoiserCache {
    conv_in: crate::diffusion::layers::ConvCache,
    pre_in: FeatMatrix,
    mid1: crate::diffusion::layers::ConvCache,
    pre1: FeatMatrix,
    mid2: crate::diffusion::layers::ConvCache,
    pre2: FeatMatrix,
    conv_out: crate::diffusion::layers::ConvCache,
    tb1: LinearCache,
    tb2: LinearCache,
}

impl Denoiser {
    fn new(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let zc = config.representation.channels();
        let w = config.width;
        Self {
            z_channels: zc,
            upsample_condition: config.representation.spatial_factor() == 2,
            conv_in: Conv2d::new(zc + w, w, rng),
            mid1: Conv2d::new(w, w, rng),
            mid2: Conv2d::new(w, w, rng),
            conv_out: Conv2d::new_zeroed(w, zc),
            time_bias1: Linear::new(config.time_embed_dim, w, rng),
            time_bias2: Linear::new(config.time_embed_dim, w, rng),
            time_embed_dim: config.time_embed_dim,
        }
    }

    pub(crate) fn forward(
        &self,
        z: &Tensor,
        ts: &[usize],
        feat: &FeatMatrix,
    ) -> Result<(Tensor, DenoiserCache)> {
        let [n, zc, zh, zw] = z.shape();
        if zc != self.z_channels {
            return Err(Error::Dimension(format!(
                "noisy target has {zc} channels, denoiser expects {}",
                self.z_channels
            )));
        }
        if ts.len() != n || feat.n != n {
            return Err(Error::Dimension(
                "batch size mismatch between target, timesteps and condition features".into(),
            ));
        }
        let scale = if self.upsample_condition { 2 } else { 1 };
        if zh != scale * feat.h || zw != scale * feat.w {
            return Err(Error::Dimension(format!(
                "target {zw}x{zh} does not match condition features {}x{} at scale {scale}",
                feat.w, feat.h
            )));
        }
        let feat_aligned = if self.upsample_condition { feat.upsample2() } else { feat.clone() };
        let zf = FeatMatrix::from_tensor(z);
        let x0 = FeatMatrix::concat_channels(&zf, &feat_aligned)?;
        let (pre_in, conv_in) = self.conv_in.forward(&x0);
        let h0 = silu_forward(&pre_in);

        let emb = time_embedding(ts, self.time_embed_dim);
        let (bias1, tb1) = self.time_bias1.forward(&emb);
        let (bias2, tb2) = self.time_bias2.forward(&emb);

        let (mut pre1, mid1) = self.mid1.forward(&h0);
        add_item_bias(&mut pre1, &bias1);
        let h1 = silu_forward(&pre1);

        let (mut pre2, mid2) = self.mid2.forward(&h1);
        add_item_bias(&mut pre2, &bias2);
        let h2 = silu_forward(&pre2);

        let (out, conv_out) = self.conv_out.forward(&h2);
        Ok((
            out.to_tensor(),
            DenoiserCache { conv_in, pre_in, mid1, pre1, mid2, pre2, conv_out, tb1, tb2 },
        ))
    }

    /// Backpropagates the prediction cotangent; returns the condition-feature
    /// cotangent at the encoder's resolution.
    pub(crate) fn backward(&mut self, dout: &Tensor, cache: &DenoiserCache) -> FeatMatrix {
        let dh2 = self.conv_out.backward(&FeatMatrix::from_tensor(dout), &cache.conv_out);
        let dpre2 = silu_backward(&dh2, &cache.pre2);
        let dbias2 = item_bias_grad(&dpre2);
        let _ = self.time_bias2.backward(&dbias2, &cache.tb2); // embedding is data
        let dh1 = self.mid2.backward(&dpre2, &cache.mid2);

        let dpre1 = silu_backward(&dh1, &cache.pre1);
        let dbias1 = item_bias_grad(&dpre1);
        let _ = self.time_bias1.backward(&dbias1, &cache.tb1);
        let dh0 = self.mid1.backward(&dpre1, &cache.mid1);

        let dpre_in = silu_backward(&dh0, &cache.pre_in);
        let dx0 = self.conv_in.backward(&dpre_in, &cache.conv_in);
        let (_dz, dfeat_aligned) = dx0.split_channels(self.z_channels);
        if self.upsample_condition {
            dfeat_aligned.downsample2_adjoint()
        } else {
            dfeat_aligned
        }
    }
}

/// Encoder and denoiser wired together with a deterministic initialization.
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    pub config: ModelConfig,
    pub encoder: CondEncoder,
    pub denoiser: Denoiser,
}

pub(crate) struct ModelCache {
    pub cond: CondCache,
    pub den: DenoiserCache,
}

impl DiffusionModel {
    /// Initializes all layers from a seeded generator: identical seeds give
    /// bit-identical parameters.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = CondEncoder::new(config.width, &mut rng);
        let denoiser = Denoiser::new(&config, &mut rng);
        Ok(Self { config, encoder, denoiser })
    }

    /// Forward pass with caches for training.
    pub(crate) fn forward_train(
        &self,
        z: &Tensor,
        ts: &[usize],
        cond: &Tensor,
    ) -> Result<(Tensor, ModelCache)> {
        if cond.batch() != z.batch() {
            return Err(Error::Dimension("condition batch must match target batch".into()));
        }
        let (feat, cond_cache) = self.encoder.forward(cond)?;
        let (out, den_cache) = self.denoiser.forward(z, ts, &feat)?;
        Ok((out, ModelCache { cond: cond_cache, den: den_cache }))
    }

    /// Backward pass accumulating gradients into every parameter.
    pub(crate) fn backward_train(&mut self, dout: &Tensor, cache: &ModelCache) {
        let dfeat = self.denoiser.backward(dout, &cache.den);
        self.encoder.backward(&dfeat, &cache.cond);
    }

    /// Predicts the noise content of `z` at timestep(s) `ts` given the
    /// condition patch. Convenience wrapper that discards training caches.
    pub fn predict_noise(&self, z: &Tensor, ts: &[usize], cond: &Tensor) -> Result<Tensor> {
        Ok(self.forward_train(z, ts, cond)?.0)
    }

    /// Visits every parameter block in a fixed declaration order (the order
    /// the checkpoint format and optimizer rely on).
    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.encoder.conv1.weight);
        f(&mut self.encoder.conv1.bias);
        f(&mut self.encoder.conv2.weight);
        f(&mut self.encoder.conv2.bias);
        f(&mut self.denoiser.conv_in.weight);
        f(&mut self.denoiser.conv_in.bias);
        f(&mut self.denoiser.mid1.weight);
        f(&mut self.denoiser.mid1.bias);
        f(&mut self.denoiser.mid2.weight);
        f(&mut self.denoiser.mid2.bias);
        f(&mut self.denoiser.conv_out.weight);
        f(&mut self.denoiser.conv_out.bias);
        f(&mut self.denoiser.time_bias1.weight);
        f(&mut self.denoiser.time_bias1.bias);
        f(&mut self.denoiser.time_bias2.weight);
        f(&mut self.denoiser.time_bias2.bias);
    }

    /// Read-only traversal in the same order as [`Self::visit_params`].
    pub fn visit_params_ref(&self, f: &mut dyn FnMut(&Param)) {
        f(&self.encoder.conv1.weight);
        f(&self.encoder.conv1.bias);
        f(&self.encoder.conv2.weight);
        f(&self.encoder.conv2.bias);
        f(&self.denoiser.conv_in.weight);
        f(&self.denoiser.conv_in.bias);
        f(&self.denoiser.mid1.weight);
        f(&self.denoiser.mid1.bias);
        f(&self.denoiser.mid2.weight);
        f(&self.denoiser.mid2.bias);
        f(&self.denoiser.conv_out.weight);
        f(&self.denoiser.conv_out.bias);
        f(&self.denoiser.time_bias1.weight);
        f(&self.denoiser.time_bias1.bias);
        f(&self.denoiser.time_bias2.weight);
        f(&self.denoiser.time_bias2.bias);
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params_ref(&mut |p| n += p.len());
        n
    }

    /// All parameter values flattened in visitor order.
    pub fn param_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit_params_ref(&mut |p| out.extend_from_slice(&p.value));
        out
    }

    /// Overwrites all parameters from a flat slice in visitor order.
    pub fn set_param_values(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "expected {} parameter values, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        self.visit_params(&mut |p| {
            let n = p.len();
            p.value.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        });
        Ok(())
    }

    /// All gradients flattened in visitor order.
    pub fn grad_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit_params_ref(&mut |p| out.extend_from_slice(&p.grad));
        out
    }

    pub fn zero_grads(&mut self) {
        self.visit_params(&mut |p| p.zero_grad());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn default_model(repr: TargetRepresentation, seed: u64) -> DiffusionModel {
        DiffusionModel::new(ModelConfig::new(repr), seed).unwrap()
    }

    #[test]
    fn parameter_count_matches_hand_tally() {
        // conv(cin→cout): 9·cin·cout + cout; linear(e→c): e·c + c.
        // Encoder: (3→16) 448, (16→16) 2320.
        // Denoiser: (19→16) 2752, 2×(16→16) 2320, (16→3) 435, 2×(16→16 linear) 272.
        let m = default_model(TargetRepresentation::EncodedAolpDolp, 0);
        assert_eq!(m.param_count(), 448 + 2320 + 2752 + 2320 + 2320 + 435 + 272 + 272);
        assert_eq!(m.param_count(), 11_139);
    }

    #[test]
    fn fresh_model_predicts_exactly_zero() {
        // Zero-initialized output head ⇒ the first noise estimate is zero.
        let m = default_model(TargetRepresentation::EncodedAolpDolp, 7);
        let z = Tensor::zeros(2, 3, 8, 8);
        let cond = Tensor::zeros(2, 1, 8, 8);
        let out = m.predict_noise(&z, &[1, 200], &cond).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
        assert_eq!(out.shape(), z.shape());
    }

    #[test]
    fn initialization_is_seed_deterministic() {
        let a = default_model(TargetRepresentation::RawAolpDolp, 11);
        let b = default_model(TargetRepresentation::RawAolpDolp, 11);
        let c = default_model(TargetRepresentation::RawAolpDolp, 12);
        assert_eq!(a.param_values(), b.param_values());
        assert_ne!(a.param_values(), c.param_values());
    }

    #[test]
    fn param_roundtrip_and_zeroing() {
        let mut m = default_model(TargetRepresentation::EncodedAolpDolp, 3);
        let values = m.param_values();
        let mut shifted = values.clone();
        for v in &mut shifted {
            *v += 0.25;
        }
        m.set_param_values(&shifted).unwrap();
        assert_eq!(m.param_values(), shifted);
        m.set_param_values(&values).unwrap();
        assert_eq!(m.param_values(), values);
        assert!(m.set_param_values(&values[1..]).is_err());
        m.zero_grads();
        assert!(m.grad_values().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn timestep_changes_prediction_once_head_is_live() {
        let mut m = default_model(TargetRepresentation::EncodedAolpDolp, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        m.visit_params(&mut |p| {
            for v in &mut p.value {
                *v = rng.gen_range(-0.3..0.3);
            }
        });
        let z = Tensor::new(1, 3, 6, 6, vec![0.1; 108]).unwrap();
        let cond = Tensor::new(1, 1, 6, 6, vec![0.2; 36]).unwrap();
        let early = m.predict_noise(&z, &[1], &cond).unwrap();
        let late = m.predict_noise(&z, &[200], &cond).unwrap();
        assert!(early.data().iter().all(|v| v.is_finite()));
        assert_ne!(early.data(), late.data());
    }

    #[test]
    fn grid_model_upsamples_condition() {
        let m = default_model(TargetRepresentation::PolarImages4, 13);
        assert!(m.denoiser.upsample_condition);
        let z = Tensor::zeros(1, 1, 8, 8);
        let cond = Tensor::zeros(1, 1, 4, 4);
        let out = m.predict_noise(&z, &[50], &cond).unwrap();
        assert_eq!(out.shape(), [1, 1, 8, 8]);
        // Same-size condition must be rejected for the grid representation.
        let bad_cond = Tensor::zeros(1, 1, 8, 8);
        assert!(m.predict_noise(&z, &[50], &bad_cond).is_err());
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let m = default_model(TargetRepresentation::EncodedAolpDolp, 17);
        let cond = Tensor::zeros(1, 1, 8, 8);
        assert!(m.predict_noise(&Tensor::zeros(1, 2, 8, 8), &[1], &cond).is_err()); // channels
        assert!(m.predict_noise(&Tensor::zeros(1, 3, 8, 8), &[1, 2], &cond).is_err()); // batch
        assert!(m.predict_noise(&Tensor::zeros(2, 3, 8, 8), &[1, 2], &cond).is_err()); // cond batch
        assert!(m
            .predict_noise(&Tensor::zeros(1, 3, 4, 4), &[1], &cond)
            .is_err()); // spatial
        assert!(DiffusionModel::new(
            ModelConfig { representation: TargetRepresentation::RawAolpDolp, width: 16, time_embed_dim: 7 },
            0
        )
        .is_err());
    }
}
