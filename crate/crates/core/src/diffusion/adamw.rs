//! Adam with decoupled weight decay.
//!
//! The decay multiplies parameters by `1 − lr·wd` before the moment-based
//! update instead of folding the decay into the gradient, so the effective
//! regularization is independent of the adaptive step size.

use crate::diffusion::model::DiffusionModel;

#[derive(Debug, Clone)]
pub struct AdamW {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub epsilon: f64,
    steps_taken: usize,
}

impl AdamW {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            weight_decay,
            epsilon: 1e-8,
            steps_taken: 0,
        }
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// One update from the gradients currently stored in the model. Uses
    /// bias-corrected moment estimates; with `learning_rate = 0` parameters
    /// are untouched (moments still accumulate).
    pub fn step(&mut self, model: &mut DiffusionModel) {
        self.steps_taken += 1;
        let lr = self.learning_rate;
        let bc1 = 1.0 - self.beta1.powi(self.steps_taken as i32);
        let bc2 = 1.0 - self.beta2.powi(self.steps_taken as i32);
        let (b1, b2, wd, eps) = (self.beta1, self.beta2, self.weight_decay, self.epsilon);
        model.visit_params(&mut |p| {
            for i in 0..p.value.len() {
                let g = p.grad[i];
                p.value[i] *= 1.0 - lr * wd;
                p.m[i] = b1 * p.m[i] + (1.0 - b1) * g;
                p.v[i] = b2 * p.v[i] + (1.0 - b2) * g * g;
                let m_hat = p.m[i] / bc1;
                let v_hat = p.v[i] / bc2;
                p.value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::model::ModelConfig;
    use crate::diffusion::repr::TargetRepresentation;
    use approx::assert_relative_eq;

    fn model() -> DiffusionModel {
        DiffusionModel::new(ModelConfig::new(TargetRepresentation::EncodedAolpDolp), 1).unwrap()
    }

    #[test]
    fn first_step_is_signed_unit_step() {
        // With constant gradient g, the bias-corrected first step reduces to
        // lr·g/(|g| + eps) ≈ lr·sign(g) regardless of magnitude.
        let mut m = model();
        let before = m.param_values();
        m.visit_params(&mut |p| p.grad.iter_mut().for_each(|g| *g = 0.5));
        let mut opt = AdamW::new(1e-3, 0.0);
        opt.step(&mut m);
        let after = m.param_values();
        for (a, b) in before.iter().zip(&after) {
            assert_relative_eq!(a - b, 1e-3, max_relative = 1e-6);
        }
        assert_eq!(opt.steps_taken(), 1);
    }

    #[test]
    fn weight_decay_shrinks_without_gradient() {
        let mut m = model();
        let before = m.param_values();
        let mut opt = AdamW::new(0.1, 0.01);
        opt.step(&mut m); // all gradients are zero
        for (a, b) in before.iter().zip(m.param_values().iter()) {
            // Only the multiplicative decay acts: b = a·(1 − lr·wd).
            assert_relative_eq!(*b, a * (1.0 - 0.1 * 0.01), max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let mut m = model();
        let before = m.param_values();
        m.visit_params(&mut |p| p.grad.iter_mut().for_each(|g| *g = 1.0));
        let mut opt = AdamW::new(0.0, 0.001);
        opt.step(&mut m);
        opt.step(&mut m);
        assert_eq!(m.param_values(), before);
    }
}
