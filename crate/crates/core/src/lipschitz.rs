//! Mesh-based local Lipschitz estimation.
//!
//! The estimate follows the procedure the certificates are built around:
//! lay a fine grid over the domain, evaluate the exact input gradient of
//! the network (or of the loss composed with it) at every grid point, and
//! take per-cell maxima of the gradient norms. Being a maximum over a
//! finite probe set, the result is a lower bound of the true local
//! constant that tightens with mesh resolution.

use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::learn::loss::LossKind;
use crate::learn::nn::{MlpModel, Workspace};
use crate::partition::{Partition, Rect};

/// What the gradient norms probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Probe {
    /// `|grad f(x)|`: the predictor alone.
    PredictorOnly,
    /// `|grad_{(x,y)} loss(f(x), y)|`: the loss composed with the
    /// predictor, the label treated as an extra input coordinate (or as a
    /// discrete slice when a label grid is supplied).
    LossComposed(LossKind),
}

/// Gradient norms sampled on a mesh.
#[derive(Debug, Clone)]
pub struct GradField {
    points: Vec<Vec<f64>>,
    norms: Vec<f64>,
    pub probed: Probe,
    pub mesh_per_dim: Vec<usize>,
}

/// Inclusive uniform grid along one axis; a single point sits at the
/// interval midpoint.
pub fn axis_mesh(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..m)
        .map(|k| lo + (hi - lo) * k as f64 / (m - 1) as f64)
        .collect()
}

fn product_mesh(domain: &Rect, mesh_per_dim: &[usize]) -> Result<Vec<Vec<f64>>> {
    if mesh_per_dim.len() != domain.dim() {
        return Err(CoreError::InvalidMesh(format!(
            "mesh has {} axes for a {}-dimensional domain",
            mesh_per_dim.len(),
            domain.dim()
        )));
    }
    if mesh_per_dim.iter().any(|&m| m == 0) {
        return Err(CoreError::InvalidMesh("zero mesh points along an axis".into()));
    }
    let axes: Vec<Vec<f64>> = domain
        .lower()
        .iter()
        .zip(domain.upper())
        .zip(mesh_per_dim)
        .map(|((lo, hi), &m)| axis_mesh(*lo, *hi, m))
        .collect();
    let total: usize = mesh_per_dim.iter().product();
    let mut points = Vec::with_capacity(total);
    let mut idx = vec![0usize; domain.dim()];
    for _ in 0..total {
        points.push(idx.iter().enumerate().map(|(ax, &k)| axes[ax][k]).collect());
        for ax in (0..domain.dim()).rev() {
            idx[ax] += 1;
            if idx[ax] < mesh_per_dim[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
    Ok(points)
}

impl GradField {
    /// Build a field from explicit points and norms (used by tools and
    /// tests that probe functions other than an [`MlpModel`]).
    pub fn from_values(
        points: Vec<Vec<f64>>,
        norms: Vec<f64>,
        probed: Probe,
        mesh_per_dim: Vec<usize>,
    ) -> Result<Self> {
        if points.len() != norms.len() {
            return Err(CoreError::InvalidMesh(
                "points and norms lengths differ".into(),
            ));
        }
        if points.is_empty() {
            return Err(CoreError::EmptyField);
        }
        if norms.iter().any(|n| !n.is_finite() || *n < 0.0) {
            return Err(CoreError::InvalidMesh("norms must be finite and >= 0".into()));
        }
        Ok(GradField {
            points,
            norms,
            probed,
            mesh_per_dim,
        })
    }

    /// Evaluate a scalar gradient-norm function over a mesh of the domain.
    pub fn from_fn(
        domain: &Rect,
        mesh_per_dim: &[usize],
        probed: Probe,
        f: impl Fn(&[f64]) -> f64 + Sync,
    ) -> Result<Self> {
        let points = product_mesh(domain, mesh_per_dim)?;
        let norms: Vec<f64> = points.par_iter().map(|p| f(p)).collect();
        Self::from_values(points, norms, probed, mesh_per_dim.to_vec())
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Write the field as CSV rows `x_0,...,x_{d-1},grad_norm`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        let dim = self.points[0].len();
        let header: Vec<String> = (0..dim)
            .map(|k| format!("x{k}"))
            .chain(std::iter::once("grad_norm".to_string()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (p, n) in self.points.iter().zip(&self.norms) {
            let mut row: Vec<String> = p.iter().map(|x| format!("{x}")).collect();
            row.push(format!("{n}"));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Gradient norms of the model (or of `loss(f(x), y)`) over a mesh.
///
/// * `Probe::PredictorOnly`: `domain` is the input box, gradients are taken
///   in `x` alone.
/// * `Probe::LossComposed` with `label_grid = None`: `domain` spans
///   `(x, y)` jointly (one more axis than the model input) and the norm
///   includes the derivative in the label coordinate.
/// * `Probe::LossComposed` with `label_grid = Some(labels)`: `domain` is
///   the input box; the mesh is replicated at each discrete label and the
///   norm is taken in `x` at that fixed label. Field points carry the
///   label as their last coordinate.
pub fn grad_norm_field(
    model: &MlpModel,
    probe: Probe,
    domain: &Rect,
    mesh_per_dim: &[usize],
    label_grid: Option<&[f64]>,
) -> Result<GradField> {
    let d_in = model.input_dim();
    match probe {
        Probe::PredictorOnly => {
            if domain.dim() != d_in {
                return Err(CoreError::DimensionMismatch {
                    expected: d_in,
                    got: domain.dim(),
                });
            }
            let points = product_mesh(domain, mesh_per_dim)?;
            let norms = par_norms(&points, |p, ws, ig| {
                model.forward_ws(p, ws);
                model.backward_ws(1.0, ws, None, Some(ig));
                norm2(ig)
            });
            GradField::from_values(points, norms, probe, mesh_per_dim.to_vec())
        }
        Probe::LossComposed(loss) => {
            loss.validate()?;
            match label_grid {
                None => {
                    if domain.dim() != d_in + 1 {
                        return Err(CoreError::DimensionMismatch {
                            expected: d_in + 1,
                            got: domain.dim(),
                        });
                    }
                    let points = product_mesh(domain, mesh_per_dim)?;
                    let norms = par_norms(&points, |p, ws, ig| {
                        let (x, y) = p.split_at(d_in);
                        let pred = model.forward_ws(x, ws);
                        let dpred = loss.grad_prediction(pred, y[0]);
                        model.backward_ws(dpred, ws, None, Some(ig));
                        let dy = loss.grad_target(pred, y[0]);
                        (norm2(ig) * norm2(ig) + dy * dy).sqrt()
                    });
                    GradField::from_values(points, norms, probe, mesh_per_dim.to_vec())
                }
                Some(labels) => {
                    if domain.dim() != d_in {
                        return Err(CoreError::DimensionMismatch {
                            expected: d_in,
                            got: domain.dim(),
                        });
                    }
                    if labels.is_empty() {
                        return Err(CoreError::InvalidLoss(
                            "loss probe needs at least one label".into(),
                        ));
                    }
                    let base = product_mesh(domain, mesh_per_dim)?;
                    let mut points = Vec::with_capacity(base.len() * labels.len());
                    for x in &base {
                        for &y in labels {
                            let mut p = x.clone();
                            p.push(y);
                            points.push(p);
                        }
                    }
                    let norms = par_norms(&points, |p, ws, ig| {
                        let (x, y) = p.split_at(d_in);
                        let pred = model.forward_ws(x, ws);
                        let dpred = loss.grad_prediction(pred, y[0]);
                        model.backward_ws(dpred, ws, None, Some(ig));
                        norm2(ig)
                    });
                    GradField::from_values(points, norms, probe, mesh_per_dim.to_vec())
                }
            }
        }
    }
}

fn par_norms(
    points: &[Vec<f64>],
    eval: impl Fn(&[f64], &mut Workspace, &mut Vec<f64>) -> f64 + Sync,
) -> Vec<f64> {
    points
        .par_chunks(1024)
        .flat_map_iter(|chunk| {
            let mut ws = Workspace::default();
            let mut ig = Vec::new();
            chunk
                .iter()
                .map(|p| eval(p, &mut ws, &mut ig))
                .collect::<Vec<f64>>()
        })
        .collect()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest gradient norm over the mesh.
pub fn global_lipschitz(field: &GradField) -> Result<f64> {
    if field.is_empty() {
        return Err(CoreError::EmptyField);
    }
    Ok(field.norms.iter().fold(0.0f64, |a, &b| a.max(b)))
}

/// Fill per-cell local Lipschitz estimates: the max gradient norm over the
/// mesh points falling in each cell.
///
/// Field points may live either in the partition's full space or in its
/// input projection (fewer coordinates); in the latter case a point
/// contributes to every cell whose projection contains it. Cells that
/// catch no mesh point inherit the maximum over face-adjacent filled
/// cells, propagated outward; an entirely uncovered partition falls back
/// to the global maximum.
pub fn local_lipschitz(field: &GradField, partition: &Partition) -> Result<Partition> {
    if field.is_empty() {
        return Err(CoreError::EmptyField);
    }
    let mut out = partition.clone();
    let full_dim = if partition.is_paired() {
        partition.input_dim() + 1
    } else {
        partition.domain().dim()
    };
    let point_dim = field.points[0].len();
    let mut values: Vec<Option<f64>> = vec![None; partition.len()];

    if point_dim == full_dim {
        for (p, &n) in field.points.iter().zip(&field.norms) {
            if let Some(idx) = out.locate(p) {
                let v = values[idx].get_or_insert(0.0);
                if n > *v {
                    *v = n;
                }
            }
        }
    } else if point_dim == partition.input_dim() {
        for (p, &n) in field.points.iter().zip(&field.norms) {
            for idx in out.cells_containing_input(p) {
                let v = values[idx].get_or_insert(0.0);
                if n > *v {
                    *v = n;
                }
            }
        }
    } else {
        return Err(CoreError::DimensionMismatch {
            expected: full_dim,
            got: point_dim,
        });
    }

    // Propagate into uncovered cells from filled face-neighbors.
    let neighbors: Vec<Vec<usize>> = (0..out.len()).map(|i| out.face_neighbors(i)).collect();
    loop {
        let mut changed = false;
        let snapshot = values.clone();
        for i in 0..values.len() {
            if snapshot[i].is_none() {
                let inherited = neighbors[i]
                    .iter()
                    .filter_map(|&j| snapshot[j])
                    .fold(None, |acc: Option<f64>, v| {
                        Some(acc.map_or(v, |a| a.max(v)))
                    });
                if inherited.is_some() {
                    values[i] = inherited;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let global = global_lipschitz(field)?;
    for (cell, value) in out.cells_mut().iter_mut().zip(values) {
        cell.local_lip = Some(value.unwrap_or(global));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::ceil_n_pow_3_5;

    #[test]
    fn constant_field_fills_every_cell() {
        let domain = Rect::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let field = GradField::from_fn(&domain, &[9, 9], Probe::PredictorOnly, |_| 3.25).unwrap();
        let part = Partition::grid(domain, &[3, 3]).unwrap();
        let filled = local_lipschitz(&field, &part).unwrap();
        assert!(filled.cells().iter().all(|c| c.local_lip == Some(3.25)));
        assert_eq!(global_lipschitz(&field).unwrap(), 3.25);
    }

    #[test]
    fn split_field_assigns_per_cell_max() {
        let domain = Rect::interval(0.0, 1.0).unwrap();
        let field = GradField::from_fn(&domain, &[64], Probe::PredictorOnly, |p| {
            if p[0] < 0.5 {
                1.0
            } else {
                5.0
            }
        })
        .unwrap();
        let part = Partition::grid(domain, &[2]).unwrap();
        let filled = local_lipschitz(&field, &part).unwrap();
        assert_eq!(filled.cells()[0].local_lip, Some(1.0));
        assert_eq!(filled.cells()[1].local_lip, Some(5.0));
        assert_eq!(global_lipschitz(&field).unwrap(), 5.0);
    }

    #[test]
    fn one_neuron_divergence_field_on_its_partition() {
        // The construction's network: slope * relu(x - 1 + 1/n) on [0, 1].
        let n = 1024u64;
        let dn = ceil_n_pow_3_5(n);
        let slope = (n as f64).sqrt() / (n as f64).log2().log2();
        let kink = 1.0 - 1.0 / n as f64;
        let domain = Rect::interval(0.0, 1.0).unwrap();
        let field = GradField::from_fn(&domain, &[512], Probe::PredictorOnly, |p| {
            if p[0] > kink {
                slope
            } else {
                0.0
            }
        })
        .unwrap();
        let part = Partition::prop10(n).unwrap();
        let filled = local_lipschitz(&field, &part).unwrap();
        // Strips: zero; the final column of squares: the full slope.
        for (i, cell) in filled.cells().iter().enumerate() {
            if i < dn as usize - 1 {
                assert_eq!(cell.local_lip, Some(0.0), "strip {i}");
            } else {
                assert_eq!(cell.local_lip, Some(slope), "column cell {i}");
            }
        }
    }

    #[test]
    fn local_never_exceeds_global_and_refinement_monotone() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let domain = Rect::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        for seed in 0..10 {
            let model = crate::learn::MlpModel::init(2, &[8, 8], seed).unwrap();
            let field =
                grad_norm_field(&model, Probe::PredictorOnly, &domain, &[33, 33], None).unwrap();
            let global = global_lipschitz(&field).unwrap();
            let coarse = local_lipschitz(&field, &Partition::grid(domain.clone(), &[2, 2]).unwrap())
                .unwrap();
            let fine = local_lipschitz(&field, &Partition::grid(domain.clone(), &[4, 4]).unwrap())
                .unwrap();
            for c in coarse.cells().iter().chain(fine.cells()) {
                assert!(c.local_lip.unwrap() <= global + 1e-12);
            }
            // Each fine cell's estimate is at most its parent's.
            for (i, c) in fine.cells().iter().enumerate() {
                let (fx, fy) = (i / 4, i % 4);
                let parent = coarse.cells()[(fx / 2) * 2 + fy / 2].local_lip.unwrap();
                assert!(c.local_lip.unwrap() <= parent + 1e-12);
            }
            let _ = rng.gen::<f64>();
        }
    }

    #[test]
    fn finer_nested_mesh_never_lowers_global_estimate() {
        let domain = Rect::interval(-2.0, 2.0).unwrap();
        let mut nondecreasing = 0;
        let trials = 100;
        for seed in 0..trials {
            let model = crate::learn::MlpModel::init(1, &[12, 12], seed).unwrap();
            let coarse =
                grad_norm_field(&model, Probe::PredictorOnly, &domain, &[65], None).unwrap();
            let fine =
                grad_norm_field(&model, Probe::PredictorOnly, &domain, &[129], None).unwrap();
            if global_lipschitz(&fine).unwrap() >= global_lipschitz(&coarse).unwrap() - 1e-12 {
                nondecreasing += 1;
            }
        }
        assert!(nondecreasing * 100 >= 95 * trials, "{nondecreasing}/{trials}");
    }

    #[test]
    fn gradient_field_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let model = crate::learn::MlpModel::init(2, &[10, 10], 3).unwrap();
        let h = 1e-5;
        for _ in 0..100 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let g = model.input_gradient(&x).unwrap();
            for k in 0..2 {
                let mut xp = x;
                xp[k] += h;
                let mut xm = x;
                xm[k] -= h;
                let fd =
                    (model.forward(&xp).unwrap() - model.forward(&xm).unwrap()) / (2.0 * h);
                assert!((g[k] - fd).abs() <= 1e-4 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn empty_cells_inherit_from_neighbors() {
        let domain = Rect::interval(0.0, 1.0).unwrap();
        // A 2-point mesh only covers the outer cells of a 4-cell partition.
        let field = GradField::from_values(
            vec![vec![0.05], vec![0.95]],
            vec![2.0, 7.0],
            Probe::PredictorOnly,
            vec![2],
        )
        .unwrap();
        let part = Partition::grid(domain, &[4]).unwrap();
        let filled = local_lipschitz(&field, &part).unwrap();
        let lips: Vec<f64> = filled.cells().iter().map(|c| c.local_lip.unwrap()).collect();
        assert_eq!(lips, vec![2.0, 2.0, 7.0, 7.0]);
    }
}
