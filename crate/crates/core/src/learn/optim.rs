//! AdamW with decoupled weight decay and a stepped learning-rate schedule.

use crate::learn::nn::{Gradients, MlpModel};

/// Adam moment parameters (standard defaults).
pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Optimizer state: first and second moments per parameter.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub lr_decay: f64,
    pub decay_every: usize,
    pub weight_decay: f64,
    m: Gradients,
    v: Gradients,
    steps: usize,
}

impl AdamW {
    pub fn new(model: &MlpModel, lr: f64, lr_decay: f64, decay_every: usize, weight_decay: f64) -> Self {
        AdamW {
            lr,
            lr_decay,
            decay_every,
            weight_decay,
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
            steps: 0,
        }
    }

    /// Learning rate in effect at `iteration` (0-based):
    /// `lr * lr_decay^(iteration / decay_every)`.
    pub fn effective_lr(&self, iteration: usize) -> f64 {
        self.lr * self.lr_decay.powi((iteration / self.decay_every) as i32)
    }

    /// One AdamW step at the given iteration index. Weight decay is applied
    /// directly to the weight matrices (not biases), decoupled from the
    /// adaptive update.
    pub fn step(&mut self, model: &mut MlpModel, grads: &Gradients, iteration: usize) {
        let lr = self.effective_lr(iteration);
        self.steps += 1;
        let t = self.steps as i32;
        let bc1 = 1.0 - BETA1.powi(t);
        let bc2 = 1.0 - BETA2.powi(t);

        for l in 0..model.weights.len() {
            if self.weight_decay > 0.0 {
                let shrink = 1.0 - lr * self.weight_decay;
                for w in &mut model.weights[l] {
                    *w *= shrink;
                }
            }
            adam_update(
                &mut model.weights[l],
                &grads.weights[l],
                &mut self.m.weights[l],
                &mut self.v.weights[l],
                lr,
                bc1,
                bc2,
            );
            adam_update(
                &mut model.biases[l],
                &grads.biases[l],
                &mut self.m.biases[l],
                &mut self.v.biases[l],
                lr,
                bc1,
                bc2,
            );
        }
    }
}

fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
        let mh = m[i] / bc1;
        let vh = v[i] / bc2;
        params[i] -= lr * mh / (vh.sqrt() + ADAM_EPS);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_frozen_values() {
        let model = MlpModel::zeros(1, &[2]).unwrap();
        let opt = AdamW::new(&model, 0.05, 0.85, 1000, 0.0);
        assert_eq!(opt.effective_lr(0), 0.05);
        assert_eq!(opt.effective_lr(999), 0.05);
        assert!((opt.effective_lr(1000) - 0.0425).abs() < 1e-15);
        assert!((opt.effective_lr(2500) - 0.05 * 0.85 * 0.85).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_no_decay_is_identity() {
        let mut model = MlpModel::init(2, &[4], 7).unwrap();
        let before = model.clone();
        let grads = Gradients::zeros_like(&model);
        let mut opt = AdamW::new(&model, 0.05, 0.85, 1000, 0.0);
        opt.step(&mut model, &grads, 0);
        assert_eq!(model, before);
    }

    #[test]
    fn zero_gradient_with_decay_shrinks_weights() {
        let mut model = MlpModel::init(2, &[4], 7).unwrap();
        let before = model.weight_sq_norm();
        let grads = Gradients::zeros_like(&model);
        let mut opt = AdamW::new(&model, 0.05, 0.85, 1000, 0.01);
        opt.step(&mut model, &grads, 0);
        assert!(model.weight_sq_norm() < before);
    }
}
