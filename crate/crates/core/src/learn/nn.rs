//! Fully-connected leaky-ReLU networks with hand-rolled reverse mode.
//!
//! Scalar output, affine final layer, negative-side slope 0.1. Gradients
//! are exact reverse-mode both in the parameters and in the input, which
//! feeds the adversarial step and the mesh-gradient Lipschitz estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::learn::loss::LossKind;

/// Slope of the activation on the negative side; also the subgradient
/// used at exactly zero.
pub const LEAKY_SLOPE: f64 = 0.1;

#[inline]
fn leaky(z: f64) -> f64 {
    if z >= 0.0 {
        z
    } else {
        z * LEAKY_SLOPE
    }
}

#[inline]
fn leaky_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// A fully-connected network `R^d -> R`. Weights are row-major
/// `(out_dim, in_dim)` per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub widths: Vec<usize>, // [input, hidden..., 1]
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Per-parameter gradients in the same layout as the model.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Gradients {
            weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for g in layer {
                *g *= factor;
            }
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self
            .weights
            .iter_mut()
            .zip(&other.weights)
            .chain(self.biases.iter_mut().zip(&other.biases))
        {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

/// Scratch buffers reused across forward/backward passes.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    pre: Vec<Vec<f64>>,  // pre-activations per hidden layer + output
    post: Vec<Vec<f64>>, // post-activations (inputs to each layer)
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

impl MlpModel {
    /// Zero-initialized network of the given shape.
    pub fn zeros(input_dim: usize, hidden: &[usize]) -> Result<Self> {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input_dim);
        widths.extend_from_slice(hidden);
        widths.push(1);
        if input_dim == 0 || hidden.iter().any(|&h| h == 0) {
            return Err(CoreError::InvalidModel("zero-width layer".into()));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..widths.len() - 1 {
            weights.push(vec![0.0; widths[l + 1] * widths[l]]);
            biases.push(vec![0.0; widths[l + 1]]);
        }
        Ok(MlpModel {
            widths,
            weights,
            biases,
        })
    }

    /// Fan-in-scaled uniform initialization, deterministic in `seed`.
    pub fn init(input_dim: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let mut model = Self::zeros(input_dim, hidden)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in 0..model.weights.len() {
            let fan_in = model.widths[l] as f64;
            let limit = (6.0 / fan_in).sqrt();
            for w in &mut model.weights[l] {
                *w = rng.gen_range(-limit..limit);
            }
        }
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Sum of squared Frobenius norms of the weight matrices.
    pub fn weight_sq_norm(&self) -> f64 {
        self.weights
            .iter()
            .flat_map(|w| w.iter())
            .map(|w| w * w)
            .sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let layers = self.layer_count();
        for l in 0..layers {
            let (w_in, w_out) = (self.widths[l], self.widths[l + 1]);
            let mut next = vec![0.0; w_out];
            for o in 0..w_out {
                let row = &self.weights[l][o * w_in..(o + 1) * w_in];
                let mut acc = self.biases[l][o];
                for (wi, xi) in row.iter().zip(&cur) {
                    acc += wi * xi;
                }
                next[o] = if l + 1 == layers { acc } else { leaky(acc) };
            }
            cur = next;
        }
        Ok(cur[0])
    }

    /// Forward pass storing activations for a subsequent backward pass.
    /// Returns the scalar output.
    pub fn forward_ws(&self, x: &[f64], ws: &mut Workspace) -> f64 {
        let layers = self.layer_count();
        ws.pre.resize(layers, Vec::new());
        ws.post.resize(layers + 1, Vec::new());
        ws.post[0].clear();
        ws.post[0].extend_from_slice(x);
        for l in 0..layers {
            let (w_in, w_out) = (self.widths[l], self.widths[l + 1]);
            let (head, tail) = ws.post.split_at_mut(l + 1);
            let input = &head[l];
            let pre = &mut ws.pre[l];
            pre.clear();
            pre.resize(w_out, 0.0);
            for o in 0..w_out {
                let row = &self.weights[l][o * w_in..(o + 1) * w_in];
                let mut acc = self.biases[l][o];
                for (wi, xi) in row.iter().zip(input.iter()) {
                    acc += wi * xi;
                }
                pre[o] = acc;
            }
            let post = &mut tail[0];
            post.clear();
            if l + 1 == layers {
                post.extend_from_slice(pre);
            } else {
                post.extend(pre.iter().map(|&z| leaky(z)));
            }
        }
        ws.post[layers][0]
    }

    /// Backward pass from an upstream derivative `dout` on the scalar
    /// output; accumulates parameter gradients into `grads` (scaled by
    /// `dout`) and returns nothing. Input gradient lands in `input_grad`.
    ///
    /// Must follow a `forward_ws` call on the same input.
    pub fn backward_ws(
        &self,
        dout: f64,
        ws: &mut Workspace,
        grads: Option<&mut Gradients>,
        input_grad: Option<&mut Vec<f64>>,
    ) {
        let layers = self.layer_count();
        ws.delta.clear();
        ws.delta.push(dout);
        let mut grads = grads;
        for l in (0..layers).rev() {
            let (w_in, w_out) = (self.widths[l], self.widths[l + 1]);
            // delta holds dLoss/dpre for layer l.
            if let Some(g) = grads.as_deref_mut() {
                let input = &ws.post[l];
                for o in 0..w_out {
                    let d = ws.delta[o];
                    if d != 0.0 {
                        let grow = &mut g.weights[l][o * w_in..(o + 1) * w_in];
                        for (gi, xi) in grow.iter_mut().zip(input.iter()) {
                            *gi += d * xi;
                        }
                    }
                    g.biases[l][o] += ws.delta[o];
                }
            }
            ws.delta_next.clear();
            ws.delta_next.resize(w_in, 0.0);
            for o in 0..w_out {
                let d = ws.delta[o];
                if d != 0.0 {
                    let row = &self.weights[l][o * w_in..(o + 1) * w_in];
                    for (acc, wi) in ws.delta_next.iter_mut().zip(row) {
                        *acc += d * wi;
                    }
                }
            }
            if l > 0 {
                for (acc, &z) in ws.delta_next.iter_mut().zip(&ws.pre[l - 1]) {
                    *acc *= leaky_grad(z);
                }
            }
            std::mem::swap(&mut ws.delta, &mut ws.delta_next);
        }
        if let Some(ig) = input_grad {
            ig.clear();
            ig.extend_from_slice(&ws.delta);
        }
    }

    /// Gradient of `f(x)` with respect to the input.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut ws = Workspace::default();
        self.forward_ws(x, &mut ws);
        let mut ig = Vec::new();
        self.backward_ws(1.0, &mut ws, None, Some(&mut ig));
        Ok(ig)
    }

    /// Gradients of `loss(f(x), y)` with respect to all parameters and the
    /// input. Returns `(loss value, parameter grads, input grad)`.
    pub fn loss_gradients(
        &self,
        loss: LossKind,
        x: &[f64],
        y: f64,
    ) -> Result<(f64, Gradients, Vec<f64>)> {
        self.check_input(x)?;
        let mut ws = Workspace::default();
        let mut grads = Gradients::zeros_like(self);
        let mut ig = Vec::new();
        let value = self.loss_backward(loss, x, y, &mut ws, &mut grads, Some(&mut ig))?;
        Ok((value, grads, ig))
    }

    /// Workspace-reusing variant of [`MlpModel::loss_gradients`];
    /// accumulates into `grads`.
    pub fn loss_backward(
        &self,
        loss: LossKind,
        x: &[f64],
        y: f64,
        ws: &mut Workspace,
        grads: &mut Gradients,
        input_grad: Option<&mut Vec<f64>>,
    ) -> Result<f64> {
        let pred = self.forward_ws(x, ws);
        let value = loss.eval(pred, y)?;
        let dpred = loss.grad_prediction(pred, y);
        self.backward_ws(dpred, ws, Some(grads), input_grad);
        Ok(value)
    }

    /// Product of layer operator norms (diagnostic upper bound on the
    /// global Lipschitz constant).
    pub fn operator_norm_product(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(l, w)| {
                let (rows, cols) = (self.widths[l + 1], self.widths[l]);
                spectral_norm(w, rows, cols)
            })
            .product()
    }
}

/// Spectral norm by power iteration (fixed seed, fixed iteration count).
fn spectral_norm(w: &[f64], rows: usize, cols: usize) -> f64 {
    let mut v = vec![1.0 / (cols as f64).sqrt(); cols];
    let mut u = vec![0.0; rows];
    for _ in 0..60 {
        for r in 0..rows {
            u[r] = w[r * cols..(r + 1) * cols]
                .iter()
                .zip(&v)
                .map(|(a, b)| a * b)
                .sum();
        }
        let un = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if un == 0.0 {
            return 0.0;
        }
        u.iter_mut().for_each(|x| *x /= un);
        for c in 0..cols {
            v[c] = (0..rows).map(|r| w[r * cols + c] * u[r]).sum();
        }
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vn == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= vn);
    }
    (0..rows)
        .map(|r| {
            w[r * cols..(r + 1) * cols]
                .iter()
                .zip(&v)
                .map(|(a, b)| a * b)
                .sum::<f64>()
        })
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn zero_model_outputs_zero() {
        let m = MlpModel::zeros(2, &[4, 4]).unwrap();
        assert_eq!(m.forward(&[0.3, -1.0]).unwrap(), 0.0);
    }

    #[test]
    fn single_affine_layer() {
        let mut m = MlpModel::zeros(1, &[]).unwrap();
        m.weights[0][0] = 2.0;
        m.biases[0][0] = 1.0;
        assert_eq!(m.forward(&[3.0]).unwrap(), 7.0);
        // No activation on the final layer: negative side is linear too.
        assert_eq!(m.forward(&[-3.0]).unwrap(), -5.0);
        assert_eq!(m.input_gradient(&[3.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn linear_layer_gradient_norm_is_weight_norm() {
        let mut m = MlpModel::zeros(3, &[]).unwrap();
        m.weights[0] = vec![1.0, -2.0, 2.0];
        let g = m.input_gradient(&[0.5, 0.5, 0.5]).unwrap();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for trial in 0..100 {
            let d = rng.gen_range(1..=3);
            let hidden: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(2..6)).collect();
            let model = MlpModel::init(d, &hidden, trial).unwrap();
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = rng.gen_range(-1.0..1.0);
            let loss = match trial % 3 {
                0 => LossKind::Huber,
                1 => LossKind::CrossEntropy,
                _ => LossKind::Ramp { gamma: 5.0 },
            };
            let y = if matches!(loss, LossKind::Huber) {
                y
            } else if y > 0.0 {
                1.0
            } else {
                -1.0
            };
            let (_, grads, input_grad) = model.loss_gradients(loss, &x, y).unwrap();

            let h = 1e-5;
            let f = |m: &MlpModel, x: &[f64]| loss.eval(m.forward(x).unwrap(), y).unwrap();
            // Input gradient check.
            for k in 0..d {
                let mut xp = x.clone();
                xp[k] += h;
                let mut xm = x.clone();
                xm[k] -= h;
                let fd = (f(&model, &xp) - f(&model, &xm)) / (2.0 * h);
                let ok = (input_grad[k] - fd).abs() <= 1e-4 * (1.0 + fd.abs());
                assert!(ok, "input grad {} vs fd {} (trial {trial})", input_grad[k], fd);
            }
            // Spot-check a few weight coordinates.
            for _ in 0..5 {
                let l = rng.gen_range(0..model.layer_count());
                let idx = rng.gen_range(0..model.weights[l].len());
                let mut mp = model.clone();
                mp.weights[l][idx] += h;
                let mut mm = model.clone();
                mm.weights[l][idx] -= h;
                let fd = (f(&mp, &x) - f(&mm, &x)) / (2.0 * h);
                let got = grads.weights[l][idx];
                assert!(
                    (got - fd).abs() <= 1e-4 * (1.0 + fd.abs()),
                    "weight grad {got} vs fd {fd} (trial {trial})"
                );
            }
        }
    }

    #[test]
    fn continuity_bounded_by_operator_norms() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for seed in 0..20 {
            let model = MlpModel::init(2, &[8, 8], seed).unwrap();
            let lip = model.operator_norm_product();
            for _ in 0..50 {
                let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let dist = x
                    .iter()
                    .zip(&y)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let df = (model.forward(&x).unwrap() - model.forward(&y).unwrap()).abs();
                assert!(df <= lip * dist + 1e-9);
            }
        }
    }
}
