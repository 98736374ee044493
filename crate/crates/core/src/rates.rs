//! Empirical-measure convergence rates and their explicit constants.
//!
//! For a compact domain of dimension `d` and a regularity level (Hölder
//! exponent `α` or smoothness order `s`), the expected optimal-transport
//! distance between a measure and its `n`-sample empirical counterpart decays
//! like `C · diam · rate(n)`. The rate and, in the Hölder case, the constant
//! split into three regimes depending on how `d` compares with `2α`
//! (resp. `2s`):
//!
//! ```text
//! d < 2α :  rate(n) = n^{-1/2}                       C = d^{α/2} 2^{d/2-2α} / (1 - 2^{d/2-α})
//! d = 2α :  rate(n) = (α 2^{α+2} + log2 n) n^{-1/2}  C = d^{α/2} / (α 2^{α+1})
//! d > 2α :  rate(n) = n^{-α/d}                       C = 2 ((d/2-α)/(2α(1-2^{α-d/2})))^{2α/d}
//!                                                        · (1 + α/(2^α (d/2-α))) · d^{α/2}
//! ```
//!
//! Smooth rates follow the same three-way split on `s` vs `d/2` with
//! `(ln n + 1) n^{-1/2}` on the critical line; no explicit constant exists
//! for the smooth class, callers supply their own.
//!
//! `rate(0) = 0` by convention: an empty cell carries no weight in the
//! per-cell sums these rates feed.

use crate::error::{CoreError, Result};

/// Regularity level of the probed function class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularity {
    /// `α`-Hölder with `α ∈ (0, 1]`; `α = 1` is the Lipschitz case.
    Holder { alpha: f64 },
    /// `s`-smooth (all partial derivatives up to order `s`), `s ≥ 1`.
    Smooth { order: f64 },
}

/// Which side of the critical dimension `d = 2α` (or `d = 2s`) we are on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `d < 2α` (resp. `s > d/2`): parametric `n^{-1/2}` decay.
    BelowCritical,
    /// `d = 2α` (resp. `s = d/2`): `n^{-1/2}` with a logarithmic factor.
    Critical,
    /// `d > 2α` (resp. `s < d/2`): dimension-limited `n^{-α/d}` decay.
    AboveCritical,
}

/// A regularity level together with the ambient dimension it lives in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityClass {
    kind: Regularity,
    ambient_dim: u32,
}

impl RegularityClass {
    /// Hölder class with exponent `alpha` in `(0, 1]` on a `d`-dimensional domain.
    pub fn holder(ambient_dim: u32, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) || !alpha.is_finite() {
            return Err(CoreError::InvalidRegularity(format!(
                "Hölder exponent must lie in (0, 1], got {alpha}"
            )));
        }
        if ambient_dim == 0 {
            return Err(CoreError::InvalidRegularity(
                "ambient dimension must be >= 1".into(),
            ));
        }
        Ok(Self {
            kind: Regularity::Holder { alpha },
            ambient_dim,
        })
    }

    /// Hölder class with a rational exponent `num/den`. The regime test
    /// `d = 2α` is then decided in integer arithmetic.
    pub fn holder_rational(ambient_dim: u32, num: u32, den: u32) -> Result<Self> {
        if den == 0 {
            return Err(CoreError::InvalidRegularity("zero denominator".into()));
        }
        let alpha = num as f64 / den as f64;
        let class = Self::holder(ambient_dim, alpha)?;
        // If num/den is not representable, the caller still gets the exact
        // integer regime decision; the rate itself uses the f64 value.
        let regime = match (2 * num as u64).cmp(&(ambient_dim as u64 * den as u64)) {
            std::cmp::Ordering::Greater => Regime::BelowCritical,
            std::cmp::Ordering::Equal => Regime::Critical,
            std::cmp::Ordering::Less => Regime::AboveCritical,
        };
        debug_assert_eq!(regime, class.regime());
        Ok(class)
    }

    /// Smooth class of order `s >= 1` on a `d`-dimensional domain.
    pub fn smooth(ambient_dim: u32, order: f64) -> Result<Self> {
        if !(order >= 1.0) || !order.is_finite() {
            return Err(CoreError::InvalidRegularity(format!(
                "smoothness order must be >= 1, got {order}"
            )));
        }
        if ambient_dim == 0 {
            return Err(CoreError::InvalidRegularity(
                "ambient dimension must be >= 1".into(),
            ));
        }
        Ok(Self {
            kind: Regularity::Smooth { order },
            ambient_dim,
        })
    }

    pub fn kind(&self) -> Regularity {
        self.kind
    }

    pub fn ambient_dim(&self) -> u32 {
        self.ambient_dim
    }

    /// Regime dispatch. Equality with the critical dimension is an exact
    /// binary comparison (`2α` and integer `d` are both exactly
    /// representable), never a floating tolerance.
    pub fn regime(&self) -> Regime {
        let d = self.ambient_dim as f64;
        let threshold = match self.kind {
            Regularity::Holder { alpha } => 2.0 * alpha,
            Regularity::Smooth { order } => 2.0 * order,
        };
        if d < threshold {
            Regime::BelowCritical
        } else if d == threshold {
            Regime::Critical
        } else {
            Regime::AboveCritical
        }
    }

    /// The explicit constant `C_{d,α}` for the Hölder class.
    ///
    /// Rejects smooth classes: only existence is known for their constants,
    /// so callers must supply one (see [`crate::bounds`]).
    pub fn holder_constant(&self) -> Result<f64> {
        let alpha = match self.kind {
            Regularity::Holder { alpha } => alpha,
            Regularity::Smooth { .. } => return Err(CoreError::SmoothConstantNotExplicit),
        };
        let d = self.ambient_dim as f64;
        let c = match self.regime() {
            Regime::BelowCritical => {
                d.powf(alpha / 2.0) * (d / 2.0 - 2.0 * alpha).exp2()
                    / (1.0 - (d / 2.0 - alpha).exp2())
            }
            Regime::Critical => d.powf(alpha / 2.0) / (alpha * (alpha + 1.0).exp2()),
            Regime::AboveCritical => {
                let gap = d / 2.0 - alpha;
                let base = gap / (2.0 * alpha * (1.0 - (alpha - d / 2.0).exp2()));
                2.0 * base.powf(2.0 * alpha / d) * (1.0 + alpha / (alpha.exp2() * gap))
                    * d.powf(alpha / 2.0)
            }
        };
        debug_assert!(c.is_finite() && c > 0.0);
        Ok(c)
    }

    /// Evaluate the rate function at sample count `n`; `rate(0) = 0`.
    pub fn rate(&self, n: u64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let nf = n as f64;
        let d = self.ambient_dim as f64;
        match self.kind {
            Regularity::Holder { alpha } => match self.regime() {
                Regime::BelowCritical => nf.powf(-0.5),
                Regime::Critical => (alpha * (alpha + 2.0).exp2() + nf.log2()) / nf.sqrt(),
                Regime::AboveCritical => nf.powf(-alpha / d),
            },
            Regularity::Smooth { order } => match self.regime() {
                Regime::BelowCritical => nf.powf(-0.5),
                Regime::Critical => (nf.ln() + 1.0) / nf.sqrt(),
                Regime::AboveCritical => nf.powf(-order / d),
            },
        }
    }
}

/// `C_{d,α}` for the Hölder class (regime-dispatched).
pub fn holder_constant(ambient_dim: u32, alpha: f64) -> Result<f64> {
    RegularityClass::holder(ambient_dim, alpha)?.holder_constant()
}

/// `rate_{d,α}(n)` for the Hölder class; `rate(0) = 0`.
pub fn holder_rate(ambient_dim: u32, alpha: f64, n: u64) -> Result<f64> {
    Ok(RegularityClass::holder(ambient_dim, alpha)?.rate(n))
}

/// `rate_{d,s}(n)` for the smooth class; `rate(0) = 0`. The matching
/// constant is not explicit and must be supplied by the caller.
pub fn smooth_rate(ambient_dim: u32, order: f64, n: u64) -> Result<f64> {
    Ok(RegularityClass::smooth(ambient_dim, order)?.rate(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn holder_constant_frozen_values() {
        // Verified against a 40-digit arbitrary-precision evaluation of the
        // same closed forms.
        assert!(rel_err(holder_constant(2, 1.0).unwrap(), 0.35355339059327376).abs() < 1e-14);
        assert!(rel_err(holder_constant(1, 1.0).unwrap(), 1.2071067811865475).abs() < 1e-14);
        assert!(rel_err(holder_constant(3, 1.0).unwrap(), 6.234109313495179).abs() < 1e-13);
        assert!(rel_err(holder_constant(5, 0.5).unwrap(), 4.282134481573627).abs() < 1e-13);
        assert!(rel_err(holder_constant(1, 0.75).unwrap(), 3.1426067539416226).abs() < 1e-13);
    }

    #[test]
    fn holder_rate_frozen_values() {
        assert_eq!(holder_rate(3, 1.0, 8).unwrap(), 0.5); // 8^{-1/3}
        assert_eq!(holder_rate(2, 1.0, 4).unwrap(), 5.0); // (8 + 2)/2
        assert_eq!(holder_rate(1, 1.0, 16).unwrap(), 0.25); // 16^{-1/2}
        assert_eq!(holder_rate(1, 1.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn smooth_rate_frozen_values() {
        let v = smooth_rate(4, 2.0, 100).unwrap();
        assert!(rel_err(v, 0.5605170185988091).abs() < 1e-14);
        assert_eq!(smooth_rate(4, 1.0, 16).unwrap(), 0.5); // 16^{-1/4}
        assert_eq!(smooth_rate(2, 3.0, 25).unwrap(), 0.2); // 25^{-1/2}
        assert_eq!(smooth_rate(3, 1.5, 0).unwrap(), 0.0);
    }

    #[test]
    fn smooth_constant_rejected() {
        let c = RegularityClass::smooth(4, 2.0).unwrap();
        assert!(matches!(
            c.holder_constant(),
            Err(CoreError::SmoothConstantNotExplicit)
        ));
    }

    #[test]
    fn regime_dispatch_is_exact() {
        assert_eq!(
            RegularityClass::holder(2, 1.0).unwrap().regime(),
            Regime::Critical
        );
        assert_eq!(
            RegularityClass::holder(1, 0.5).unwrap().regime(),
            Regime::Critical
        );
        assert_eq!(
            RegularityClass::holder(1, 1.0).unwrap().regime(),
            Regime::BelowCritical
        );
        assert_eq!(
            RegularityClass::holder(3, 1.0).unwrap().regime(),
            Regime::AboveCritical
        );
        // A hair below the critical exponent must not flap to Critical.
        let nearly = 0.5 - f64::EPSILON;
        assert_eq!(
            RegularityClass::holder(1, nearly).unwrap().regime(),
            Regime::AboveCritical
        );
        assert_eq!(
            RegularityClass::holder_rational(1, 1, 2).unwrap().regime(),
            Regime::Critical
        );
        assert_eq!(
            RegularityClass::smooth(4, 2.0).unwrap().regime(),
            Regime::Critical
        );
        assert_eq!(
            RegularityClass::smooth(4, 2.5).unwrap().regime(),
            Regime::BelowCritical
        );
        assert_eq!(
            RegularityClass::smooth(6, 2.0).unwrap().regime(),
            Regime::AboveCritical
        );
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(RegularityClass::holder(2, 0.0).is_err());
        assert!(RegularityClass::holder(2, 1.5).is_err());
        assert!(RegularityClass::holder(0, 1.0).is_err());
        assert!(RegularityClass::smooth(2, 0.5).is_err());
    }

    #[test]
    fn rates_monotone_nonincreasing() {
        // The smooth critical row (ln n + 1)/sqrt(n) peaks at n = e, so its
        // decay only starts at n = 3; every other row decays from n = 1.
        let classes = [
            (RegularityClass::holder(1, 1.0).unwrap(), 1u64),
            (RegularityClass::holder(2, 1.0).unwrap(), 1),
            (RegularityClass::holder(1, 0.5).unwrap(), 1),
            (RegularityClass::holder(3, 1.0).unwrap(), 1),
            (RegularityClass::holder(5, 0.25).unwrap(), 1),
            (RegularityClass::smooth(4, 2.0).unwrap(), 3),
            (RegularityClass::smooth(2, 3.0).unwrap(), 1),
            (RegularityClass::smooth(6, 1.0).unwrap(), 1),
        ];
        for (class, start) in classes {
            let mut prev = class.rate(start);
            for n in start + 1..2000u64 {
                let cur = class.rate(n);
                assert!(
                    cur <= prev + 1e-15,
                    "rate increased at n={n} for {class:?}: {prev} -> {cur}"
                );
                prev = cur;
            }
        }
    }

    #[test]
    fn holder_constant_positive_finite() {
        for d in 1..=8u32 {
            for &alpha in &[0.1, 0.25, 0.5, 0.75, 0.9, 1.0] {
                let c = holder_constant(d, alpha).unwrap();
                assert!(c.is_finite() && c > 0.0, "C({d},{alpha}) = {c}");
            }
        }
    }
}
