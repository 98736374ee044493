//! Loss functions: Huber for regression, ramp and logistic cross-entropy
//! for binary classification with labels in `{-1, +1}`.

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    /// `min(r^2, |r|)` in the residual `r = prediction - target`: squared
    /// for `|r| < 1`, absolute beyond.
    Huber,
    /// Margin ramp `min(1, (1 - y1 y2 / gamma)_+)`; upper-bounds the 0-1
    /// loss and is `1/gamma`-Lipschitz in the prediction.
    Ramp { gamma: f64 },
    /// Logistic negative log-likelihood `ln(1 + exp(-y f))` through a
    /// single logit, labels in `{-1, +1}`.
    CrossEntropy,
}

fn check_ramp_target(target: f64) -> Result<()> {
    if target != 1.0 && target != -1.0 {
        return Err(CoreError::InvalidLoss(format!(
            "ramp targets must be -1 or +1, got {target}"
        )));
    }
    Ok(())
}

impl LossKind {
    pub fn validate(&self) -> Result<()> {
        if let LossKind::Ramp { gamma } = self {
            if !(*gamma > 0.0) {
                return Err(CoreError::InvalidLoss("ramp margin must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn eval(&self, prediction: f64, target: f64) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            LossKind::Huber => {
                let r = prediction - target;
                if r.abs() < 1.0 {
                    r * r
                } else {
                    r.abs()
                }
            }
            LossKind::Ramp { gamma } => {
                check_ramp_target(target)?;
                (1.0 - prediction * target / gamma).max(0.0).min(1.0)
            }
            LossKind::CrossEntropy => {
                check_ramp_target(target)?;
                let z = prediction * target;
                // ln(1 + exp(-z)) computed stably.
                (-z).max(0.0) + (-(z.abs())).exp().ln_1p()
            }
        })
    }

    /// Derivative of the loss in its prediction argument. At the ramp's
    /// kinks the subgradient from the sloped side of the lower kink is
    /// used; both kink sets have measure zero.
    pub fn grad_prediction(&self, prediction: f64, target: f64) -> f64 {
        match *self {
            LossKind::Huber => {
                let r = prediction - target;
                if r.abs() < 1.0 {
                    2.0 * r
                } else {
                    r.signum()
                }
            }
            LossKind::Ramp { gamma } => {
                let margin = prediction * target;
                if (0.0..gamma).contains(&margin) {
                    -target / gamma
                } else {
                    0.0
                }
            }
            LossKind::CrossEntropy => {
                let z = prediction * target;
                // d/df ln(1 + e^{-yf}) = -y sigma(-yf)
                -target / (1.0 + z.exp())
            }
        }
    }

    /// Derivative of the loss in its target argument, for losses whose
    /// target varies continuously (Huber). Classification losses treat the
    /// label as discrete and return 0.
    pub fn grad_target(&self, prediction: f64, target: f64) -> f64 {
        match *self {
            LossKind::Huber => -self.grad_prediction(prediction, target),
            LossKind::Ramp { .. } | LossKind::CrossEntropy => 0.0,
        }
    }

    /// The Lipschitz constant of the loss in its prediction argument, as
    /// used by the certificate assembly: 1 for Huber (the value the bound
    /// statements assume), `1/gamma` for the ramp, 1 for cross-entropy.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            LossKind::Huber => 1.0,
            LossKind::Ramp { gamma } => 1.0 / gamma,
            LossKind::CrossEntropy => 1.0,
        }
    }
}

/// 0-1 classification loss `1{y1 y2 <= 0}`.
pub fn zero_one(prediction: f64, target: f64) -> f64 {
    if prediction * target <= 0.0 {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn huber_branches() {
        assert_eq!(LossKind::Huber.eval(0.5, 0.0).unwrap(), 0.25);
        assert_eq!(LossKind::Huber.eval(2.0, 0.0).unwrap(), 2.0);
        assert_eq!(LossKind::Huber.eval(1.3, 1.3).unwrap(), 0.0);
    }

    #[test]
    fn ramp_endpoints() {
        let ramp = LossKind::Ramp { gamma: 5.0 };
        assert_eq!(ramp.eval(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(ramp.eval(5.0, 1.0).unwrap(), 0.0);
        assert_eq!(ramp.eval(-10.0, 1.0).unwrap(), 1.0);
        assert!(ramp.eval(0.0, 0.5).is_err());
        // Flat beyond the margin.
        assert_eq!(ramp.grad_prediction(6.0, 1.0), 0.0);
        assert_eq!(ramp.grad_prediction(2.0, 1.0), -0.2);
    }

    #[test]
    fn ramp_dominates_zero_one() {
        let ramp = LossKind::Ramp { gamma: 3.0 };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10_000 {
            let pred = rng.gen_range(-10.0..10.0);
            let target = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            assert!(ramp.eval(pred, target).unwrap() >= zero_one(pred, target));
        }
    }

    #[test]
    fn cross_entropy_matches_naive() {
        let ce = LossKind::CrossEntropy;
        for &(f, y) in &[(0.0, 1.0), (3.0, -1.0), (-2.5, -1.0), (10.0, 1.0)] {
            let naive = (1.0 + (-(f * y) as f64).exp()).ln();
            assert!((ce.eval(f, y).unwrap() - naive).abs() < 1e-12);
        }
        // Stable for large logits.
        assert!(ce.eval(800.0, -1.0).unwrap() > 700.0);
        assert_eq!(ce.eval(800.0, 1.0).unwrap(), 0.0);
    }
}
