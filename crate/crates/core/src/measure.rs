//! Weighted point clouds standing in for empirical probability measures.

use std::collections::HashMap;
use std::io::BufRead;

use crate::error::{CoreError, Result};

/// A finitely supported probability measure: points with positive weights
/// summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

impl EmpiricalMeasure {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(CoreError::InvalidMeasure("empty support".into()));
        }
        if points.len() != weights.len() {
            return Err(CoreError::InvalidMeasure(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(CoreError::InvalidMeasure("zero-dimensional points".into()));
        }
        for p in &points {
            if p.len() != dim {
                return Err(CoreError::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(CoreError::InvalidMeasure("non-finite coordinate".into()));
            }
        }
        let mut sum = 0.0;
        for &w in &weights {
            if !(w > 0.0) || !w.is_finite() {
                return Err(CoreError::InvalidMeasure(format!(
                    "weights must be positive, got {w}"
                )));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(CoreError::InvalidMeasure(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self { points, weights })
    }

    /// Uniform weights `1/n` on the given support.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(CoreError::InvalidMeasure("empty support".into()));
        }
        let w = 1.0 / n as f64;
        Self::new(points, vec![w; n])
    }

    /// A single unit point mass.
    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Are all weights equal to `1/n` (up to rounding)?
    pub fn is_uniform(&self) -> bool {
        let w0 = 1.0 / self.len() as f64;
        self.weights.iter().all(|&w| (w - w0).abs() <= 1e-12 * w0)
    }

    /// Merge bitwise-identical atoms, summing their weights. Keeps the
    /// first-occurrence order of the support.
    pub fn merge_duplicates(&self) -> EmpiricalMeasure {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::with_capacity(self.len());
        let mut points: Vec<Vec<f64>> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (p, &w) in self.points.iter().zip(&self.weights) {
            let key: Vec<u64> = p.iter().map(|x| x.to_bits()).collect();
            match index.entry(key) {
                std::collections::hash_map::Entry::Occupied(e) => weights[*e.get()] += w,
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(points.len());
                    points.push(p.clone());
                    weights.push(w);
                }
            }
        }
        EmpiricalMeasure { points, weights }
    }

    /// Translate every atom by `v`.
    pub fn translated(&self, v: &[f64]) -> Result<EmpiricalMeasure> {
        if v.len() != self.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let points = self
            .points
            .iter()
            .map(|p| p.iter().zip(v).map(|(x, dx)| x + dx).collect())
            .collect();
        Ok(EmpiricalMeasure {
            points,
            weights: self.weights.clone(),
        })
    }

    /// Read a measure from CSV, one point per row. With `weighted` set, the
    /// last column is a weight (normalized to sum to one); otherwise all
    /// columns are coordinates and weights are uniform. A non-numeric first
    /// row is treated as a header and skipped.
    pub fn read_csv<R: BufRead>(reader: R, weighted: bool) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> = trimmed
                .split(',')
                .map(|tok| tok.trim().parse::<f64>())
                .collect();
            match parsed {
                Ok(vals) => rows.push(vals),
                Err(e) => {
                    if lineno == 0 && rows.is_empty() {
                        continue; // header
                    }
                    return Err(CoreError::Parse(format!("csv line {}: {e}", lineno + 1)));
                }
            }
        }
        if rows.is_empty() {
            return Err(CoreError::InvalidMeasure("empty csv".into()));
        }
        if weighted {
            let mut points = Vec::with_capacity(rows.len());
            let mut weights = Vec::with_capacity(rows.len());
            for mut row in rows {
                let w = row.pop().ok_or_else(|| {
                    CoreError::InvalidMeasure("weighted csv row with no columns".into())
                })?;
                points.push(row);
                weights.push(w);
            }
            let total: f64 = weights.iter().sum();
            if !(total > 0.0) {
                return Err(CoreError::InvalidMeasure(
                    "weights must have positive total".into(),
                ));
            }
            for w in &mut weights {
                *w /= total;
            }
            Self::new(points, weights)
        } else {
            Self::uniform(rows)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_and_validation() {
        let m = EmpiricalMeasure::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        assert!(m.is_uniform());
        assert_eq!(m.dim(), 1);
        assert!(EmpiricalMeasure::new(vec![vec![0.0]], vec![0.5]).is_err());
        assert!(EmpiricalMeasure::new(vec![vec![0.0], vec![1.0, 2.0]], vec![0.5, 0.5]).is_err());
        assert!(EmpiricalMeasure::new(vec![], vec![]).is_err());
    }

    #[test]
    fn merge_duplicates_sums_weights() {
        let m = EmpiricalMeasure::new(
            vec![vec![1.0], vec![2.0], vec![1.0]],
            vec![0.25, 0.5, 0.25],
        )
        .unwrap();
        let merged = m.merge_duplicates();
        assert_eq!(merged.len(), 2);
        assert_eq!(merged.weights(), &[0.5, 0.5]);
        assert_eq!(merged.points()[0], vec![1.0]);
    }

    #[test]
    fn csv_round() {
        let unweighted = "x,y\n0.0,1.0\n2.0,3.0\n";
        let m = EmpiricalMeasure::read_csv(unweighted.as_bytes(), false).unwrap();
        assert_eq!(m.len(), 2);
        assert!(m.is_uniform());

        let weighted = "0.0,1.0,2.0\n2.0,3.0,6.0\n";
        let m = EmpiricalMeasure::read_csv(weighted.as_bytes(), true).unwrap();
        assert_eq!(m.dim(), 2);
        assert!((m.weights()[0] - 0.25).abs() < 1e-15);
        assert!((m.weights()[1] - 0.75).abs() < 1e-15);
    }
}
