//! Exact optimal-transport distances between empirical measures.
//!
//! `w_alpha` solves the discrete problem
//! `min_pi sum_ij pi_ij |x_i - y_j|^alpha` exactly with a network simplex;
//! for `alpha = 1` this is the Wasserstein-1 distance, and for
//! `alpha in (0,1)` the ground cost is the snowflaked Euclidean metric, so
//! the value is the OT distance whose 1-Lipschitz test functions are exactly
//! the `alpha`-Hölder ones.

mod simplex;

pub use simplex::{solve_transport, CostOracle, DenseCost, SnowflakeCost, TransportSolution};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::measure::EmpiricalMeasure;

/// Distances smaller than this are reported as exactly zero.
const ZERO_SNAP: f64 = 1e-12;

/// An optimal coupling between two (duplicate-merged) measures.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    /// `(source atom, target atom, mass)` with indices into the merged
    /// supports returned alongside the plan.
    pub flows: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

impl TransportPlan {
    /// Marginals of the plan (row sums, column sums).
    pub fn marginals(&self, m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut rows = vec![0.0; m];
        let mut cols = vec![0.0; n];
        for &(i, j, f) in &self.flows {
            rows[i] += f;
            cols[j] += f;
        }
        (rows, cols)
    }

    /// Plan cost recomputed from flows against the given supports.
    pub fn recompute_cost(
        &self,
        a: &EmpiricalMeasure,
        b: &EmpiricalMeasure,
        alpha: f64,
    ) -> f64 {
        self.flows
            .iter()
            .map(|&(i, j, f)| f * snowflake_dist(&a.points()[i], &b.points()[j], alpha))
            .sum()
    }
}

fn snowflake_dist(x: &[f64], y: &[f64], alpha: f64) -> f64 {
    let sq: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if alpha == 1.0 {
        sq.sqrt()
    } else {
        sq.powf(0.5 * alpha)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) || !alpha.is_finite() {
        return Err(CoreError::InvalidMeasure(format!(
            "snowflake exponent must lie in (0, 1], got {alpha}"
        )));
    }
    Ok(())
}

fn flatten(points: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut flat = Vec::with_capacity(points.len() * dim);
    for p in points {
        flat.extend_from_slice(p);
    }
    flat
}

/// Exact snowflaked Wasserstein distance `W_alpha(a, b)` together with an
/// optimal plan over the duplicate-merged supports.
///
/// Returns `(distance, plan, merged_a, merged_b)`; plan indices refer to the
/// merged measures.
pub fn w_alpha_with_plan(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    alpha: f64,
) -> Result<(f64, TransportPlan, EmpiricalMeasure, EmpiricalMeasure)> {
    check_alpha(alpha)?;
    if a.dim() != b.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let a = a.merge_duplicates();
    let b = b.merge_duplicates();
    let dim = a.dim();

    let flat_a = flatten(a.points(), dim);
    let flat_b = flatten(b.points(), dim);

    let sol = if a.len() * b.len() <= 1 << 22 {
        let cost = DenseCost {
            n_cols: b.len(),
            values: (0..a.len() * b.len())
                .map(|id| {
                    let (i, j) = (id / b.len(), id % b.len());
                    snowflake_dist(
                        &flat_a[i * dim..(i + 1) * dim],
                        &flat_b[j * dim..(j + 1) * dim],
                        alpha,
                    )
                })
                .collect(),
        };
        simplex::solve_transport(a.weights(), b.weights(), &cost)?
    } else {
        let cost = SnowflakeCost {
            dim,
            alpha,
            source: &flat_a,
            target: &flat_b,
        };
        simplex::solve_transport(a.weights(), b.weights(), &cost)?
    };

    let flows = sol.flows;
    let distance = if sol.cost < ZERO_SNAP { 0.0 } else { sol.cost };
    Ok((
        distance,
        TransportPlan {
            flows,
            cost: distance,
        },
        a,
        b,
    ))
}

/// Exact snowflaked Wasserstein distance `W_alpha(a, b)`.
pub fn w_alpha(a: &EmpiricalMeasure, b: &EmpiricalMeasure, alpha: f64) -> Result<f64> {
    Ok(w_alpha_with_plan(a, b, alpha)?.0)
}

/// Wasserstein-1 in one dimension.
///
/// For equal atom counts with uniform weights this is the sorted-support
/// mean absolute difference; anything else falls back to the exact solver.
pub fn w1_1d(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<f64> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(CoreError::DimensionMismatch {
            expected: 1,
            got: a.dim().max(b.dim()),
        });
    }
    if a.len() == b.len() && a.is_uniform() && b.is_uniform() {
        let mut xs: Vec<f64> = a.points().iter().map(|p| p[0]).collect();
        let mut ys: Vec<f64> = b.points().iter().map(|p| p[0]).collect();
        xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
        ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let total: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / a.len() as f64;
        return Ok(if total < ZERO_SNAP { 0.0 } else { total });
    }
    w_alpha(a, b, 1.0)
}

/// Monte-Carlo estimate of `E[W_alpha(mu, mu^N)]`.
///
/// Each trial draws `n` points for the empirical measure and a fresh
/// `reference_factor * n`-point cloud standing in for `mu` itself, then
/// solves exactly. Trials use independent RNG streams derived from
/// `(seed, trial)`, so the result does not depend on how the trials are
/// scheduled. Returns the mean over trials and its standard error.
///
/// The reference approximation under-estimates the true distance by at most
/// `W_alpha(mu, reference)`, which vanishes as the reference grows.
pub fn mc_wasserstein_mean<S>(
    sampler: &S,
    n: usize,
    trials: usize,
    alpha: f64,
    seed: u64,
) -> Result<(f64, f64)>
where
    S: Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync,
{
    mc_wasserstein_mean_with_reference(sampler, n, trials, alpha, seed, 50)
}

/// [`mc_wasserstein_mean`] with an explicit reference-cloud multiplier.
pub fn mc_wasserstein_mean_with_reference<S>(
    sampler: &S,
    n: usize,
    trials: usize,
    alpha: f64,
    seed: u64,
    reference_factor: usize,
) -> Result<(f64, f64)>
where
    S: Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync,
{
    check_alpha(alpha)?;
    if n == 0 || trials < 2 || reference_factor == 0 {
        return Err(CoreError::InvalidMeasure(
            "need n >= 1, trials >= 2 and a positive reference factor".into(),
        ));
    }
    let values: Vec<Result<f64>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64 + 1);
            let draw = |rng: &mut ChaCha8Rng, count: usize| -> Result<Vec<Vec<f64>>> {
                let mut pts = Vec::with_capacity(count);
                let mut dim = None;
                for _ in 0..count {
                    let p = sampler(rng);
                    match dim {
                        None => dim = Some(p.len()),
                        Some(d) if d != p.len() => {
                            return Err(CoreError::DimensionMismatch {
                                expected: d,
                                got: p.len(),
                            })
                        }
                        _ => {}
                    }
                    pts.push(p);
                }
                Ok(pts)
            };
            let sample = EmpiricalMeasure::uniform(draw(&mut rng, n)?)?;
            let reference =
                EmpiricalMeasure::uniform(draw(&mut rng, reference_factor * n)?)?;
            if sample.dim() != reference.dim() {
                return Err(CoreError::DimensionMismatch {
                    expected: sample.dim(),
                    got: reference.dim(),
                });
            }
            w_alpha(&sample, &reference, alpha)
        })
        .collect();

    let mut dists = Vec::with_capacity(trials);
    for v in values {
        dists.push(v?);
    }
    let mean = dists.iter().sum::<f64>() / trials as f64;
    let var = dists
        .iter()
        .map(|d| (d - mean) * (d - mean))
        .sum::<f64>()
        / (trials as f64 - 1.0);
    let stderr = (var / trials as f64).sqrt();
    Ok((mean, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn uniform(points: Vec<Vec<f64>>) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform(points).unwrap()
    }

    /// Minimum over all permutation plans; exact for uniform equal-size
    /// supports by Birkhoff.
    fn permutation_oracle(a: &EmpiricalMeasure, b: &EmpiricalMeasure, alpha: f64) -> f64 {
        let n = a.len();
        assert_eq!(n, b.len());
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut perm, 0, &mut |p| {
            let cost: f64 = p
                .iter()
                .enumerate()
                .map(|(i, &j)| snowflake_dist(&a.points()[i], &b.points()[j], alpha))
                .sum::<f64>()
                / n as f64;
            if cost < best {
                best = cost;
            }
        });
        best
    }

    fn permute(perm: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == perm.len() {
            visit(perm);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            permute(perm, k + 1, visit);
            perm.swap(k, i);
        }
    }

    #[test]
    fn identity_and_dirac_cases() {
        let d0 = EmpiricalMeasure::dirac(vec![0.0]).unwrap();
        assert_eq!(w_alpha(&d0, &d0, 1.0).unwrap(), 0.0);
        let d4 = EmpiricalMeasure::dirac(vec![4.0]).unwrap();
        assert!((w_alpha(&d0, &d4, 0.5).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_translation() {
        let a = uniform(vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        let b = uniform(vec![vec![0.0, 1.0], vec![1.0, 1.0]]);
        let (d, plan, ma, mb) = w_alpha_with_plan(&a, &b, 1.0).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        let (rows, cols) = plan.marginals(ma.len(), mb.len());
        for (r, w) in rows.iter().zip(ma.weights()) {
            assert!((r - w).abs() < 1e-10);
        }
        for (c, w) in cols.iter().zip(mb.weights()) {
            assert!((c - w).abs() < 1e-10);
        }
        assert!((plan.recompute_cost(&ma, &mb, 1.0) - d).abs() < 1e-10);
    }

    #[test]
    fn matches_permutation_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for trial in 0..200 {
            let n = rng.gen_range(1..=6);
            let d = rng.gen_range(1..=3);
            let alpha = if trial % 2 == 0 { 1.0 } else { 0.5 };
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
                (0..n)
                    .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
                    .collect::<Vec<Vec<f64>>>()
            };
            let a = uniform(draw(&mut rng));
            let b = uniform(draw(&mut rng));
            let exact = w_alpha(&a, &b, alpha).unwrap();
            let oracle = permutation_oracle(&a, &b, alpha);
            assert!(
                (exact - oracle).abs() < 1e-9,
                "trial {trial}: exact {exact} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn w1_1d_agrees_with_lp() {
        let a = uniform(vec![vec![0.0], vec![1.0]]);
        let b = uniform(vec![vec![1.0], vec![2.0]]);
        assert!((w1_1d(&a, &b).unwrap() - 1.0).abs() < 1e-12);

        let c = uniform(vec![vec![0.3], vec![-1.0], vec![0.7]]);
        assert_eq!(w1_1d(&c, &c).unwrap(), 0.0);

        let a = uniform(vec![vec![0.0], vec![0.5], vec![1.0]]);
        let b = uniform(vec![vec![0.25], vec![0.5], vec![0.75]]);
        assert!((w1_1d(&a, &b).unwrap() - 0.5 / 3.0).abs() < 1e-12);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let n = rng.gen_range(1..=8);
            let a = uniform((0..n).map(|_| vec![rng.gen_range(-3.0..3.0)]).collect());
            let b = uniform((0..n).map(|_| vec![rng.gen_range(-3.0..3.0)]).collect());
            let fast = w1_1d(&a, &b).unwrap();
            let lp = w_alpha(&a, &b, 1.0).unwrap();
            assert!((fast - lp).abs() < 1e-10, "fast {fast} vs lp {lp}");
        }
    }

    #[test]
    fn metric_axioms_hold() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let n = rng.gen_range(1..=5);
            let alpha = rng.gen_range(0.3..=1.0);
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
                uniform(
                    (0..n)
                        .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                        .collect(),
                )
            };
            let a = draw(&mut rng);
            let b = draw(&mut rng);
            let c = draw(&mut rng);
            assert_eq!(w_alpha(&a, &a, alpha).unwrap(), 0.0);
            let ab = w_alpha(&a, &b, alpha).unwrap();
            let ba = w_alpha(&b, &a, alpha).unwrap();
            assert!((ab - ba).abs() < 1e-10);
            let bc = w_alpha(&b, &c, alpha).unwrap();
            let ac = w_alpha(&a, &c, alpha).unwrap();
            assert!(ac <= ab + bc + 1e-10);
            // Bounded by the joint support diameter to the alpha.
            let mut diam: f64 = 0.0;
            let all: Vec<&Vec<f64>> = a.points().iter().chain(b.points()).collect();
            for p in &all {
                for q in &all {
                    diam = diam.max(snowflake_dist(p, q, 1.0));
                }
            }
            assert!(ab <= diam.powf(alpha) + 1e-10);
        }
    }

    #[test]
    fn duplicate_atoms_merge_cleanly() {
        let a = EmpiricalMeasure::new(
            vec![vec![0.0], vec![0.0], vec![1.0]],
            vec![0.25, 0.25, 0.5],
        )
        .unwrap();
        let b = uniform(vec![vec![0.0], vec![1.0]]);
        let (d, _plan, ma, _) = w_alpha_with_plan(&a, &b, 1.0).unwrap();
        assert_eq!(ma.len(), 2);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn translation_distance_is_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vec<f64>> = (0..64)
            .map(|_| vec![rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)])
            .collect();
        let a = uniform(pts);
        let b = a.translated(&[0.5, 0.0]).unwrap();
        let d = w_alpha(&a, &b, 1.0).unwrap();
        assert!((d - 0.5).abs() < 1e-10);
    }

    #[test]
    fn mc_point_mass_is_zero() {
        let sampler = |_: &mut ChaCha8Rng| vec![0.7, -0.2];
        let (mean, stderr) = mc_wasserstein_mean(&sampler, 4, 8, 1.0, 3).unwrap();
        assert_eq!(mean, 0.0);
        assert_eq!(stderr, 0.0);
    }

    #[test]
    fn mc_single_sample_uniform_line() {
        // E[W_1(U[0,1], delta_x)] = integral of x^2 - x + 1/2 = 1/3.
        let sampler = |rng: &mut ChaCha8Rng| vec![rng.gen::<f64>()];
        let (mean, stderr) = mc_wasserstein_mean(&sampler, 1, 200, 1.0, 17).unwrap();
        assert!(
            (mean - 1.0 / 3.0).abs() <= 3.0 * stderr,
            "mean {mean}, stderr {stderr}"
        );
    }

    #[test]
    fn mc_is_deterministic_given_seed() {
        let sampler = |rng: &mut ChaCha8Rng| vec![rng.gen::<f64>(), rng.gen::<f64>()];
        let a = mc_wasserstein_mean(&sampler, 8, 6, 1.0, 5).unwrap();
        let b = mc_wasserstein_mean(&sampler, 8, 6, 1.0, 5).unwrap();
        assert_eq!(a, b);
    }
}
