//! Mini-batch training loop: shuffled batches, AdamW updates, optional
//! adversarial input perturbation and early stopping. Fully deterministic
//! given the config seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::learn::loss::LossKind;
use crate::learn::nn::{Gradients, MlpModel, Workspace};
use crate::learn::optim::AdamW;
use crate::learn::tasks::Dataset;
use crate::partition::Rect;

/// Training hyperparameters. Defaults follow the experiment setup: initial
/// learning rate 0.05 decayed by 0.85 every 1000 iterations, 20000
/// iterations, batch 8 for regression and 16 for classification.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub lr_decay: f64,
    pub decay_every: usize,
    pub iterations: usize,
    pub batch: usize,
    pub weight_decay: f64,
    pub adv_eps: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl TrainConfig {
    pub fn regression_default(seed: u64) -> Self {
        TrainConfig {
            lr: 0.05,
            lr_decay: 0.85,
            decay_every: 1000,
            iterations: 20_000,
            batch: 8,
            weight_decay: 0.0,
            adv_eps: 0.0,
            hidden: vec![64, 64, 64],
            seed,
        }
    }

    pub fn classification_default(seed: u64) -> Self {
        TrainConfig {
            batch: 16,
            ..Self::regression_default(seed)
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(CoreError::InvalidConfig("learning rate must be positive".into()));
        }
        if self.batch == 0 || self.batch > n {
            return Err(CoreError::InvalidConfig(format!(
                "batch size {} incompatible with dataset size {n}",
                self.batch
            )));
        }
        if self.adv_eps < 0.0 || self.weight_decay < 0.0 {
            return Err(CoreError::InvalidConfig("negative regularization".into()));
        }
        Ok(())
    }
}

/// One-step adversarial example: `x + eps * grad_x loss`, clipped into the
/// domain box. The raw gradient is used, not its sign.
pub fn adversarial_example(
    model: &MlpModel,
    loss: LossKind,
    x: &[f64],
    y: f64,
    eps: f64,
    domain: &Rect,
) -> Result<Vec<f64>> {
    if eps < 0.0 {
        return Err(CoreError::InvalidConfig("adversarial eps must be >= 0".into()));
    }
    if eps == 0.0 {
        return Ok(x.to_vec());
    }
    let (_, _, input_grad) = model.loss_gradients(loss, x, y)?;
    let mut adv: Vec<f64> = x
        .iter()
        .zip(&input_grad)
        .map(|(xi, gi)| xi + eps * gi)
        .collect();
    domain.clip(&mut adv);
    Ok(adv)
}

/// Train a freshly initialized network on the dataset.
///
/// Returns the model and the per-iteration mini-batch training loss.
/// `early_stop_at` truncates training at that iteration count.
pub fn train(
    data: &Dataset,
    config: &TrainConfig,
    loss: LossKind,
    domain: &Rect,
    early_stop_at: Option<usize>,
) -> Result<(MlpModel, Vec<f64>)> {
    if data.is_empty() {
        return Err(CoreError::InvalidConfig("empty dataset".into()));
    }
    loss.validate()?;
    config.validate(data.len())?;
    let input_dim = data.inputs[0].len();

    let mut model = MlpModel::init(input_dim, &config.hidden, config.seed)?;
    let mut opt = AdamW::new(
        &model,
        config.lr,
        config.lr_decay,
        config.decay_every,
        config.weight_decay,
    );
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(0x7368);

    let total = early_stop_at
        .map(|stop| stop.min(config.iterations))
        .unwrap_or(config.iterations);
    let mut history = Vec::with_capacity(total);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = data.len(); // force an initial shuffle
    let mut ws = Workspace::default();
    let mut grads = Gradients::zeros_like(&model);
    let mut adv_buf: Vec<f64> = Vec::new();
    let mut input_grad: Vec<f64> = Vec::new();

    for iteration in 0..total {
        grads.scale(0.0);
        let mut batch_loss = 0.0;
        for _ in 0..config.batch {
            if cursor >= data.len() {
                order.shuffle(&mut shuffle_rng);
                cursor = 0;
            }
            let idx = order[cursor];
            cursor += 1;
            let (x, y) = (&data.inputs[idx], data.targets[idx]);
            let value = if config.adv_eps > 0.0 {
                // One forward/backward to build the perturbed input, then a
                // gradient step on it.
                let pred = model.forward_ws(x, &mut ws);
                let dpred = loss.grad_prediction(pred, y);
                model.backward_ws(dpred, &mut ws, None, Some(&mut input_grad));
                adv_buf.clear();
                adv_buf.extend(
                    x.iter()
                        .zip(&input_grad)
                        .map(|(xi, gi)| xi + config.adv_eps * gi),
                );
                domain.clip(&mut adv_buf);
                model.loss_backward(loss, &adv_buf, y, &mut ws, &mut grads, None)?
            } else {
                model.loss_backward(loss, x, y, &mut ws, &mut grads, None)?
            };
            batch_loss += value;
        }
        grads.scale(1.0 / config.batch as f64);
        opt.step(&mut model, &grads, iteration);
        history.push(batch_loss / config.batch as f64);
    }
    Ok((model, history))
}

/// Mean loss of the model on a dataset.
pub fn empirical_risk(model: &MlpModel, loss: LossKind, data: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for (x, &y) in data.inputs.iter().zip(&data.targets) {
        total += loss.eval(model.forward(x)?, y)?;
    }
    Ok(total / data.len() as f64)
}

/// Mean 0-1 error of the model on a labeled dataset.
pub fn zero_one_risk(model: &MlpModel, data: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for (x, &y) in data.inputs.iter().zip(&data.targets) {
        total += crate::learn::loss::zero_one(model.forward(x)?, y);
    }
    Ok(total / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::tasks;

    fn small_config(seed: u64) -> TrainConfig {
        TrainConfig {
            iterations: 300,
            hidden: vec![16, 16],
            ..TrainConfig::regression_default(seed)
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = tasks::synth_regression(64, 5).unwrap();
        let domain = tasks::regression_input_domain();
        let cfg = small_config(5);
        let (m1, h1) = train(&data, &cfg, LossKind::Huber, &domain, None).unwrap();
        let (m2, h2) = train(&data, &cfg, LossKind::Huber, &domain, None).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(h1, h2);
    }

    #[test]
    fn early_stopping_truncates() {
        let data = tasks::synth_regression(64, 5).unwrap();
        let domain = tasks::regression_input_domain();
        let cfg = small_config(5);
        let (m_short, h_short) = train(&data, &cfg, LossKind::Huber, &domain, Some(50)).unwrap();
        assert_eq!(h_short.len(), 50);
        // Truncation is a prefix of the full run.
        let (_m_full, h_full) = train(&data, &cfg, LossKind::Huber, &domain, None).unwrap();
        assert_eq!(&h_full[..50], &h_short[..]);
        drop(m_short);
    }

    #[test]
    fn training_reduces_loss() {
        let data = tasks::synth_regression(128, 11).unwrap();
        let domain = tasks::regression_input_domain();
        let cfg = TrainConfig {
            iterations: 800,
            hidden: vec![32, 32],
            ..TrainConfig::regression_default(11)
        };
        let (model, history) = train(&data, &cfg, LossKind::Huber, &domain, None).unwrap();
        let final_risk = empirical_risk(&model, LossKind::Huber, &data).unwrap();
        let head: f64 = history[..50].iter().sum::<f64>() / 50.0;
        assert!(final_risk < head, "risk {final_risk} vs initial {head}");
        assert!(final_risk < 0.1);
    }

    #[test]
    fn weight_decay_shrinks_weights() {
        let data = tasks::synth_regression(64, 3).unwrap();
        let domain = tasks::regression_input_domain();
        let base = small_config(3);
        let decayed = TrainConfig {
            weight_decay: 0.01,
            ..base.clone()
        };
        let (m0, _) = train(&data, &base, LossKind::Huber, &domain, None).unwrap();
        let (m1, _) = train(&data, &decayed, LossKind::Huber, &domain, None).unwrap();
        assert!(m1.weight_sq_norm() < m0.weight_sq_norm());
    }

    #[test]
    fn adversarial_example_rules() {
        let domain = tasks::regression_input_domain();
        let mut model = MlpModel::zeros(1, &[]).unwrap();
        model.weights[0][0] = 2.0; // f(x) = 2x
        let x = vec![1.0];
        // eps = 0 is the identity.
        assert_eq!(
            adversarial_example(&model, LossKind::Huber, &x, 2.5, 0.0, &domain).unwrap(),
            x
        );
        // Huber in the squared branch: d/dx (2x - y)^2 = 2r * 2.
        let y = 2.5; // r = -0.5
        let adv = adversarial_example(&model, LossKind::Huber, &x, y, 0.1, &domain).unwrap();
        assert!((adv[0] - (1.0 + 0.1 * (2.0 * -0.5) * 2.0)).abs() < 1e-12);
        // Clipped at the boundary when the gradient points outward:
        // r = 9.8 + 20 > 1, so grad_x = sign(r) * w = 2 and eps pushes past 5.
        let adv =
            adversarial_example(&model, LossKind::Huber, &[4.9], -20.0, 3.0, &domain).unwrap();
        assert_eq!(adv[0], 5.0);
        assert!(adversarial_example(&model, LossKind::Huber, &[0.0], 0.0, -1.0, &domain).is_err());
    }
}
