//! The two synthetic supervised tasks: 1-D logistic regression with
//! Gaussian noise and 2-D binary classification with Bernoulli labels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::partition::Rect;

/// A labeled dataset; inputs of common dimension, scalar targets.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Joint `(x, y)` points, the sample cloud the certificate partitions.
    pub fn joint_points(&self) -> Vec<Vec<f64>> {
        self.inputs
            .iter()
            .zip(&self.targets)
            .map(|(x, y)| {
                let mut p = x.clone();
                p.push(*y);
                p
            })
            .collect()
    }
}

/// Regression target: a logistic step centered at `x = -2`.
pub fn regression_target(x: f64) -> f64 {
    1.0 / (1.0 + (5.0 * (x + 2.0)).exp())
}

/// Observation noise scale of the regression task.
pub const REGRESSION_NOISE: f64 = 0.1;

/// Input domain of the regression task.
pub fn regression_input_domain() -> Rect {
    Rect::interval(-5.0, 5.0).expect("static domain")
}

/// Target domain of the regression task.
pub fn regression_target_domain() -> Rect {
    Rect::interval(-1.0, 2.0).expect("static domain")
}

/// Input domain of the classification task.
pub fn classification_input_domain() -> Rect {
    Rect::new(vec![-5.0, -5.0], vec![5.0, 5.0]).expect("static domain")
}

/// Classification logit: a ring of radius 0 around (2, 2) plus a small
/// trigonometric ripple, pushed through the logistic link for label noise.
pub fn classification_logit(x1: f64, x2: f64) -> f64 {
    10.0 * ((x1 - 2.0) * (x1 - 2.0) + (x2 - 2.0) * (x2 - 2.0)).sqrt()
        - 0.25 * (2.0 * x1).sin()
        + 1.5 * x2.cos()
}

/// Logistic link used for the label noise.
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Draw one label at `(x1, x2)` through the classification link.
pub fn draw_label(rng: &mut ChaCha8Rng, x1: f64, x2: f64) -> f64 {
    let p = sigmoid(classification_logit(x1, x2));
    if rng.gen::<f64>() < p {
        1.0
    } else {
        -1.0
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniforms per draw keeps the stream layout simple.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Draw the regression dataset: `x ~ U(-5, 5)`,
/// `y = target(x) + N(0, 0.1^2)` clipped to `[-1, 2]`.
pub fn synth_regression(n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x5265); // distinct stream per task
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.gen_range(-5.0..5.0);
        let y = (regression_target(x) + REGRESSION_NOISE * gaussian(&mut rng)).clamp(-1.0, 2.0);
        inputs.push(vec![x]);
        targets.push(y);
    }
    Ok(Dataset { inputs, targets })
}

/// Draw the classification dataset: `x ~ U([-5,5]^2)`,
/// `y ~ Bernoulli(sigma(logit(x)))` mapped to `{-1, +1}`.
pub fn synth_classification(n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x436c);
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = rng.gen_range(-5.0..5.0);
        let x2 = rng.gen_range(-5.0..5.0);
        let y = draw_label(&mut rng, x1, x2);
        inputs.push(vec![x1, x2]);
        targets.push(y);
    }
    Ok(Dataset { inputs, targets })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_midpoint() {
        assert!((regression_target(-2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn logit_frozen_value() {
        // -sin(4)/4 + 1.5 cos(2), ring term vanishing at its center.
        assert!((classification_logit(2.0, 2.0) - (-0.4350196309937315)).abs() < 1e-12);
    }

    #[test]
    fn datasets_deterministic_and_in_domain() {
        let a = synth_regression(100, 3).unwrap();
        let b = synth_regression(100, 3).unwrap();
        assert_eq!(a.inputs, b.inputs);
        assert_eq!(a.targets, b.targets);
        assert!(a.targets.iter().all(|&y| (-1.0..=2.0).contains(&y)));
        assert!(a.inputs.iter().all(|x| (-5.0..5.0).contains(&x[0])));

        let c = synth_classification(100, 3).unwrap();
        let d = synth_classification(100, 3).unwrap();
        assert_eq!(c.inputs, d.inputs);
        assert_eq!(c.targets, d.targets);
        assert!(c.targets.iter().all(|&y| y == 1.0 || y == -1.0));
        // Different seeds differ.
        let e = synth_classification(100, 4).unwrap();
        assert_ne!(c.inputs, e.inputs);
    }

    #[test]
    fn label_frequencies_match_link() {
        // Empirical frequency of +1 at each probe of a 10x10 grid must sit
        // inside a 3-sigma binomial band around sigma(logit).
        let probes: Vec<(f64, f64)> = (0..10)
            .flat_map(|i| (0..10).map(move |j| (-4.5 + i as f64, -4.5 + j as f64)))
            .collect();
        let draws = 10_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for &(x1, x2) in &probes {
            let p = sigmoid(classification_logit(x1, x2));
            let mut plus = 0usize;
            for _ in 0..draws {
                if draw_label(&mut rng, x1, x2) > 0.0 {
                    plus += 1;
                }
            }
            let freq = plus as f64 / draws as f64;
            let sigma = (p * (1.0 - p) / draws as f64).sqrt();
            assert!(
                (freq - p).abs() <= 3.0 * sigma + 1e-9,
                "probe ({x1},{x2}): freq {freq} vs p {p}"
            );
        }
    }
}
