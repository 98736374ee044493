//! Certificate assembly: the partitioned generalization bound and its
//! variants (global, classification, manifold rate, distribution shift),
//! the covering-number Rademacher comparator, and the closed forms of the
//! one-neuron divergence construction.
//!
//! Every assembly routes its per-cell rate through the regime-dispatched
//! [`crate::rates`] table instead of hard-coding a single exponent, with
//! the cell count entering as `(N_P / N) * rate(N_P)`. Empty cells
//! contribute nothing to the transport cost but still count toward the
//! partition size.

use crate::error::{CoreError, Result};
use crate::partition::{ceil_n_pow_3_5, Partition};
use crate::rates::{holder_constant, Regime, RegularityClass};

/// Scalar inputs shared by the bound assemblies.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub n: usize,
    pub delta: f64,
    /// Lipschitz constant of the loss in its prediction argument.
    pub loss_lip: f64,
    /// (Estimated) global Lipschitz constant of the predictor.
    pub predictor_lip: f64,
    /// Sup norm of the loss over the evaluation range.
    pub loss_sup: f64,
    /// Input dimension `d`.
    pub input_dim: u32,
    /// Ramp margin, required by the classification bound.
    pub gamma: Option<f64>,
    /// Intrinsic dimension for the manifold-rate variant.
    pub intrinsic_dim: Option<u32>,
    /// The manifold variant's constant (existence-only, user-supplied).
    pub manifold_constant: Option<f64>,
    /// Wasserstein-1 distance to the shifted distribution.
    pub shift_w1: Option<f64>,
}

impl BoundInputs {
    pub fn new(n: usize, delta: f64, loss_lip: f64, predictor_lip: f64, loss_sup: f64, input_dim: u32) -> Result<Self> {
        let inputs = BoundInputs {
            n,
            delta,
            loss_lip,
            predictor_lip,
            loss_sup,
            input_dim,
            gamma: None,
            intrinsic_dim: None,
            manifold_constant: None,
            shift_w1: None,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(CoreError::InvalidBoundInputs("sample count must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(CoreError::InvalidBoundInputs(format!(
                "delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        for (name, v) in [
            ("loss_lip", self.loss_lip),
            ("predictor_lip", self.predictor_lip),
            ("loss_sup", self.loss_sup),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(CoreError::InvalidBoundInputs(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.input_dim == 0 {
            return Err(CoreError::InvalidBoundInputs("input dimension must be >= 1".into()));
        }
        Ok(())
    }
}

/// Which certificate a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    Thm5,
    GlobalEq2,
    Cor7,
    Prop6,
    Cor8,
    RademacherC,
    Prop10Local,
    Prop10Global,
}

impl Theorem {
    pub fn name(&self) -> &'static str {
        match self {
            Theorem::Thm5 => "thm5",
            Theorem::GlobalEq2 => "global_eq2",
            Theorem::Cor7 => "cor7",
            Theorem::Prop6 => "prop6",
            Theorem::Cor8 => "cor8",
            Theorem::RademacherC => "rademacher",
            Theorem::Prop10Local => "prop10_local",
            Theorem::Prop10Global => "prop10_global",
        }
    }
}

/// How the per-cell regularity factor is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LipMode {
    /// `local_lip` holds `Lip(loss o f | P)` and is used directly.
    Tightened,
    /// `local_lip` holds `Lip(f | P_X)`; the factor is
    /// `loss_lip * max(1, local_lip)` as in the theorem statement.
    Split,
}

/// Inputs and context a report was assembled from.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub partition_size: usize,
    pub mesh_per_dim: Vec<usize>,
    pub rate_dim: u32,
    pub rate_constant: f64,
    pub regime: Regime,
    pub mode: LipMode,
    pub smooth_constant_defaulted: bool,
    pub manifold_constant_user_supplied: bool,
    /// For the shift certificate: was the shift estimated from samples
    /// (`Some(true)`), user-supplied (`Some(false)`), or absent (`None`)?
    pub shift_w1_empirical: Option<bool>,
    pub vacuous: bool,
}

impl Provenance {
    fn new(partition_size: usize, rate_dim: u32, rate_constant: f64, regime: Regime, mode: LipMode) -> Self {
        Provenance {
            partition_size,
            mesh_per_dim: Vec::new(),
            rate_dim,
            rate_constant,
            regime,
            mode,
            smooth_constant_defaulted: false,
            manifold_constant_user_supplied: false,
            shift_w1_empirical: None,
            vacuous: false,
        }
    }
}

/// A certificate broken into its terms. `total` is the exact sum of the
/// other value fields.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub theorem: Theorem,
    pub n: usize,
    pub delta: f64,
    /// Empirical surrogate term (the ramp training error in the
    /// classification bound; zero elsewhere).
    pub train_error: f64,
    pub cost_transport: f64,
    pub err_transport: f64,
    pub cost_partition: f64,
    pub shift_term: f64,
    pub total: f64,
    pub provenance: Provenance,
}

impl BoundReport {
    fn assemble(
        theorem: Theorem,
        inputs: &BoundInputs,
        train_error: f64,
        cost_transport: f64,
        err_transport: f64,
        cost_partition: f64,
        shift_term: f64,
        mut provenance: Provenance,
    ) -> Self {
        let total = train_error + cost_transport + err_transport + cost_partition + shift_term;
        provenance.vacuous = total > inputs.loss_sup;
        BoundReport {
            theorem,
            n: inputs.n,
            delta: inputs.delta,
            train_error,
            cost_transport,
            err_transport,
            cost_partition,
            shift_term,
            total,
            provenance,
        }
    }

    pub fn csv_header() -> &'static str {
        "theorem,N,delta,k,cost_transport,err_transport,cost_partition,shift_term,total,vacuous,mesh_per_dim,seed"
    }

    pub fn csv_row(&self, seed: u64) -> String {
        let mesh = if self.provenance.mesh_per_dim.is_empty() {
            "-".to_string()
        } else {
            self.provenance
                .mesh_per_dim
                .iter()
                .map(|m| m.to_string())
                .collect::<Vec<_>>()
                .join("x")
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.theorem.name(),
            self.n,
            self.delta,
            self.provenance.partition_size,
            self.cost_transport,
            self.err_transport,
            self.cost_partition,
            self.shift_term,
            self.total,
            self.provenance.vacuous,
            mesh,
            seed
        )
    }
}

/// Pairwise-tree sum: deterministic and accurate regardless of how the
/// terms were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        len => {
            let mid = len / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

fn regularity_factor(mode: LipMode, inputs: &BoundInputs, local_lip: f64) -> f64 {
    match mode {
        LipMode::Tightened => local_lip,
        LipMode::Split => inputs.loss_lip * local_lip.max(1.0),
    }
}

fn err_transport_term(inputs: &BoundInputs, max_diam: f64) -> f64 {
    ((4.0 / inputs.delta).ln() / inputs.n as f64).sqrt()
        * inputs.loss_lip
        * inputs.predictor_lip.max(1.0)
        * max_diam
}

fn cost_partition_term(inputs: &BoundInputs, k: usize) -> f64 {
    if k <= 1 {
        return 0.0;
    }
    let nf = inputs.n as f64;
    inputs.loss_sup * ((2.0 * (4.0 / inputs.delta).ln() / nf).sqrt().max((k as f64 / nf).sqrt()))
}

fn check_counts(inputs: &BoundInputs, partition: &Partition) -> Result<()> {
    let total = partition.total_count();
    if total != inputs.n {
        return Err(CoreError::InvalidBoundInputs(format!(
            "partition counts sum to {total}, expected N = {}",
            inputs.n
        )));
    }
    for (i, cell) in partition.cells().iter().enumerate() {
        if cell.count > 0 && cell.local_lip.is_none() {
            return Err(CoreError::InvalidBoundInputs(format!(
                "cell {i} holds samples but carries no local Lipschitz estimate"
            )));
        }
    }
    Ok(())
}

/// The partitioned certificate on a counted, Lipschitz-annotated partition
/// of the joint input-target space.
///
/// The per-cell rate is dispatched through the Hölder table at ambient
/// dimension `d + 1`; for `d >= 2` this reproduces the printed
/// `N_P^{d/(d+1)}` form, while `d = 1` lands on the critical row with its
/// logarithmic factor.
pub fn theorem5_bound(
    inputs: &BoundInputs,
    partition: &Partition,
    mode: LipMode,
) -> Result<BoundReport> {
    inputs.validate()?;
    check_counts(inputs, partition)?;
    let class = RegularityClass::holder(inputs.input_dim + 1, 1.0)?;
    let constant = class.holder_constant()?;
    let nf = inputs.n as f64;
    let terms: Vec<f64> = partition
        .cells()
        .iter()
        .map(|cell| {
            if cell.count == 0 {
                return 0.0;
            }
            let lip = cell.local_lip.unwrap_or(0.0);
            (cell.count as f64 / nf)
                * class.rate(cell.count as u64)
                * cell.diameter()
                * regularity_factor(mode, inputs, lip)
        })
        .collect();
    let cost_transport = constant * pairwise_sum(&terms);
    let err = err_transport_term(inputs, partition.max_diameter());
    let cost_partition = cost_partition_term(inputs, partition.len());
    let provenance = Provenance::new(
        partition.len(),
        inputs.input_dim + 1,
        constant,
        class.regime(),
        mode,
    );
    Ok(BoundReport::assemble(
        Theorem::Thm5,
        inputs,
        0.0,
        cost_transport,
        err,
        cost_partition,
        0.0,
        provenance,
    ))
}

/// The global (single-cell) counterpart: no partition cost.
///
/// `global_lip` is interpreted per `mode`: the composed-loss global
/// Lipschitz estimate under [`LipMode::Tightened`], the predictor's global
/// constant (floored at 1 and scaled by the loss constant) under
/// [`LipMode::Split`].
pub fn global_bound(
    inputs: &BoundInputs,
    global_lip: f64,
    domain_diam: f64,
    mode: LipMode,
) -> Result<BoundReport> {
    inputs.validate()?;
    if !(domain_diam >= 0.0) || !domain_diam.is_finite() {
        return Err(CoreError::InvalidBoundInputs(
            "domain diameter must be finite and >= 0".into(),
        ));
    }
    let class = RegularityClass::holder(inputs.input_dim + 1, 1.0)?;
    let constant = class.holder_constant()?;
    let cost_transport = constant
        * class.rate(inputs.n as u64)
        * domain_diam
        * regularity_factor(mode, inputs, global_lip);
    let err = err_transport_term(inputs, domain_diam);
    let provenance = Provenance::new(1, inputs.input_dim + 1, constant, class.regime(), mode);
    Ok(BoundReport::assemble(
        Theorem::GlobalEq2,
        inputs,
        0.0,
        cost_transport,
        err,
        0.0,
        0.0,
        provenance,
    ))
}

/// Classification-error certificate on a paired partition carrying sample
/// counts and per-input-cell predictor Lipschitz estimates.
///
/// The pair at each input cell is collapsed with the `2^{1/d}` power-mean
/// factor and the combined count enters the regime-dispatched rate at
/// ambient dimension `d`.
pub fn classification_bound(
    inputs: &BoundInputs,
    paired: &Partition,
    ramp_train_error: f64,
) -> Result<BoundReport> {
    inputs.validate()?;
    let gamma = inputs.gamma.ok_or_else(|| {
        CoreError::InvalidBoundInputs("classification bound needs the ramp margin gamma".into())
    })?;
    if !(gamma > 0.0) {
        return Err(CoreError::InvalidBoundInputs("gamma must be positive".into()));
    }
    if !paired.is_paired() {
        return Err(CoreError::InvalidBoundInputs(
            "classification bound takes a paired partition".into(),
        ));
    }
    if !(0.0..=1.0).contains(&ramp_train_error) {
        return Err(CoreError::InvalidBoundInputs(format!(
            "ramp training error must lie in [0, 1], got {ramp_train_error}"
        )));
    }
    check_counts(inputs, paired)?;
    let d = inputs.input_dim;
    let class = RegularityClass::holder(d, 1.0)?;
    let constant = class.holder_constant()?;
    let nf = inputs.n as f64;
    let k = paired.len() / 2;

    let cells = paired.cells();
    let terms: Vec<f64> = (0..k)
        .map(|i| {
            let minus = &cells[2 * i];
            let plus = &cells[2 * i + 1];
            let count = minus.count + plus.count;
            if count == 0 {
                return 0.0;
            }
            let lip = minus
                .local_lip
                .or(plus.local_lip)
                .unwrap_or(0.0);
            (count as f64 / nf) * class.rate(count as u64) * minus.diameter() * lip
        })
        .collect();
    let cost_transport = (2f64.powf(1.0 / d as f64) * constant / gamma) * pairwise_sum(&terms);
    let max_diam = paired.max_diameter();
    let err = ((4.0 / inputs.delta).ln() / nf).sqrt() * (inputs.predictor_lip / gamma) * max_diam;
    let cost_partition =
        (2.0 / nf).sqrt() * (4.0 / inputs.delta).ln().sqrt().max((k as f64).sqrt());
    let provenance = Provenance::new(paired.len(), d, constant, class.regime(), LipMode::Split);
    Ok(BoundReport::assemble(
        Theorem::Cor7,
        inputs,
        ramp_train_error,
        cost_transport,
        err,
        cost_partition,
        0.0,
        provenance,
    ))
}

/// Manifold-rate variant: the transport cost uses the flat `N_P^{-1/d~}`
/// concentration rate of the intrinsic dimension with a user-supplied
/// constant; the deviation and partition terms are unchanged.
pub fn manifold_bound(
    inputs: &BoundInputs,
    partition: &Partition,
    mode: LipMode,
) -> Result<BoundReport> {
    inputs.validate()?;
    let d_int = inputs.intrinsic_dim.ok_or_else(|| {
        CoreError::InvalidBoundInputs("manifold bound needs the intrinsic dimension".into())
    })?;
    let constant = inputs.manifold_constant.ok_or_else(|| {
        CoreError::InvalidBoundInputs(
            "manifold bound needs its constant (only existence is known; supply one)".into(),
        )
    })?;
    if d_int == 0 || !(constant > 0.0) {
        return Err(CoreError::InvalidBoundInputs(
            "intrinsic dimension and constant must be positive".into(),
        ));
    }
    check_counts(inputs, partition)?;
    let nf = inputs.n as f64;
    let terms: Vec<f64> = partition
        .cells()
        .iter()
        .map(|cell| {
            if cell.count == 0 {
                return 0.0;
            }
            let lip = cell.local_lip.unwrap_or(0.0);
            let manifold_rate = (cell.count as f64).powf(-1.0 / d_int as f64);
            (cell.count as f64 / nf)
                * manifold_rate
                * cell.diameter()
                * regularity_factor(mode, inputs, lip)
        })
        .collect();
    let cost_transport = constant * pairwise_sum(&terms);
    let err = err_transport_term(inputs, partition.max_diameter());
    let cost_partition = cost_partition_term(inputs, partition.len());
    let mut provenance = Provenance::new(
        partition.len(),
        d_int,
        constant,
        Regime::AboveCritical,
        mode,
    );
    provenance.manifold_constant_user_supplied = true;
    Ok(BoundReport::assemble(
        Theorem::Prop6,
        inputs,
        0.0,
        cost_transport,
        err,
        cost_partition,
        0.0,
        provenance,
    ))
}

/// Distribution-shift certificate: the global bound plus
/// `loss_lip * max(1, predictor_lip) * W_1(mu, mu_adv)`.
pub fn shift_bound(
    inputs: &BoundInputs,
    global_lip: f64,
    domain_diam: f64,
    mode: LipMode,
    shift_is_empirical: bool,
) -> Result<BoundReport> {
    let shift_w1 = inputs.shift_w1.ok_or_else(|| {
        CoreError::InvalidBoundInputs("shift bound needs W1(mu, mu_adv)".into())
    })?;
    if !(shift_w1 >= 0.0) {
        return Err(CoreError::InvalidBoundInputs("shift distance must be >= 0".into()));
    }
    let base = global_bound(inputs, global_lip, domain_diam, mode)?;
    let shift_term = inputs.loss_lip * inputs.predictor_lip.max(1.0) * shift_w1;
    let mut provenance = base.provenance.clone();
    provenance.shift_w1_empirical = Some(shift_is_empirical);
    Ok(BoundReport::assemble(
        Theorem::Cor8,
        inputs,
        0.0,
        base.cost_transport,
        base.err_transport,
        0.0,
        shift_term,
        provenance,
    ))
}

/// Explicit uniform Rademacher comparator for the class of `class_lip`-
/// Lipschitz functions on a domain inside `[0, domain_scale]^d`, with
/// `sup_norm` bounding the class in sup norm:
///
/// ```text
/// 4 L_l (8 (d+1)^2 D^2 (16 B L)^d / N)^{1/(d+3)}
///   + 16 sqrt(2) L_l D ((1/N) (16 B L)^d / (8 (d+1) D)^{d+1})^{1/(d+3)}
///   + sup_loss sqrt(8 ln(2/delta) / N)
/// ```
#[allow(clippy::too_many_arguments)]
pub fn rademacher_bound(
    input_dim: u32,
    sup_norm: f64,
    domain_scale: f64,
    class_lip: f64,
    loss_lip: f64,
    loss_sup: f64,
    n: usize,
    delta: f64,
) -> Result<f64> {
    if input_dim == 0 || n == 0 {
        return Err(CoreError::InvalidBoundInputs("need d >= 1 and N >= 1".into()));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(CoreError::InvalidBoundInputs("delta must lie in (0, 1]".into()));
    }
    for (name, v) in [
        ("sup_norm", sup_norm),
        ("domain_scale", domain_scale),
        ("class_lip", class_lip),
        ("loss_lip", loss_lip),
        ("loss_sup", loss_sup),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(CoreError::InvalidBoundInputs(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    let d = input_dim as f64;
    let nf = n as f64;
    let exponent = 1.0 / (d + 3.0);
    let covering = (16.0 * domain_scale * class_lip).powf(d);
    let t1 = (8.0 * (d + 1.0) * (d + 1.0) * sup_norm * sup_norm * covering / nf).powf(exponent);
    let t2 = ((covering / (8.0 * (d + 1.0) * sup_norm).powf(d + 1.0)) / nf).powf(exponent);
    Ok(4.0 * loss_lip * t1
        + 16.0 * 2f64.sqrt() * loss_lip * sup_norm * t2
        + loss_sup * (8.0 * (2.0 / delta).ln() / nf).sqrt())
}

/// The two empirical Rademacher-complexity terms of the comparator (before
/// the loss contraction); exposed for direct checks.
pub fn rademacher_complexity_terms(
    input_dim: u32,
    sup_norm: f64,
    domain_scale: f64,
    class_lip: f64,
    n: usize,
) -> (f64, f64) {
    let d = input_dim as f64;
    let nf = n as f64;
    let exponent = 1.0 / (d + 3.0);
    let covering = (16.0 * domain_scale * class_lip).powf(d);
    let t1 = (8.0 * (d + 1.0) * (d + 1.0) * sup_norm * sup_norm * covering / nf).powf(exponent);
    let t2 = 4.0
        * 2f64.sqrt()
        * sup_norm
        * ((covering / (8.0 * (d + 1.0) * sup_norm).powf(d + 1.0)) / nf).powf(exponent);
    (t1, t2)
}

/// Closed forms of the one-neuron construction on `[0,1]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prop10Forms {
    pub n: usize,
    /// Strip count of the partition (its size is `2 D - 1`).
    pub strip_count: u64,
    pub local_cost_transport: f64,
    pub local_err_transport: f64,
    pub local_cost_partition: f64,
    pub local_total: f64,
    pub global_cost_transport: f64,
}

/// Evaluate the divergence construction's bound terms at sample count `n`.
///
/// The local certificate uses the strip partition of size
/// `2 ceil(n^{3/5}) - 1` and vanishes as `n` grows; the global transport
/// cost `sqrt(2) C_{2,1} L_l (8 + log2 n)` diverges.
pub fn prop10_closed_forms(
    n: usize,
    loss_lip: f64,
    delta: f64,
    loss_sup: f64,
) -> Result<Prop10Forms> {
    if n < 16 {
        return Err(CoreError::InvalidBoundInputs(
            "construction needs N >= 16 so log2(log2 N) > 0".into(),
        ));
    }
    if !(delta > 0.0 && delta <= 1.0) || !(loss_lip > 0.0) || !(loss_sup > 0.0) {
        return Err(CoreError::InvalidBoundInputs("bad construction inputs".into()));
    }
    let nf = n as f64;
    let c21 = holder_constant(2, 1.0)?;
    let loglog = nf.log2().log2();
    let dn = ceil_n_pow_3_5(n as u64);
    let ln4d = (4.0 / delta).ln();

    let local_cost_transport = 8.0 * 2f64.sqrt() * c21 * loss_lip / (loglog * nf.powf(0.1));
    let local_err_transport = 2f64.sqrt() * loss_lip * ln4d.sqrt() / loglog;
    let local_cost_partition =
        (loss_sup / nf.sqrt()) * (2.0 * ln4d).sqrt().max(((2 * dn - 1) as f64).sqrt());
    let global_cost_transport = 2f64.sqrt() * c21 * loss_lip * (8.0 + nf.log2());
    Ok(Prop10Forms {
        n,
        strip_count: dn,
        local_cost_transport,
        local_err_transport,
        local_cost_partition,
        local_total: local_cost_transport + local_err_transport + local_cost_partition,
        global_cost_transport,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::Rect;

    fn inputs(n: usize, delta: f64) -> BoundInputs {
        BoundInputs::new(n, delta, 1.0, 2.0, 1.0, 1).unwrap()
    }

    fn counted_partition(cells_per_dim: &[usize], counts: &[usize], lips: &[f64]) -> Partition {
        let domain = Rect::new(vec![0.0; cells_per_dim.len()], vec![1.0; cells_per_dim.len()])
            .unwrap();
        let mut p = Partition::grid(domain, cells_per_dim).unwrap();
        for ((cell, &c), &l) in p.cells_mut().iter_mut().zip(counts).zip(lips) {
            cell.count = c;
            cell.local_lip = Some(l);
        }
        p
    }

    #[test]
    fn partition_cost_frozen_value() {
        // k = 4, N = 100, delta = 0.05: the ln branch wins.
        let inp = BoundInputs::new(100, 0.05, 1.0, 1.0, 1.0, 1).unwrap();
        let p = counted_partition(&[4], &[25, 25, 25, 25], &[1.0; 4]);
        let report = theorem5_bound(&inp, &p, LipMode::Tightened).unwrap();
        assert!((report.cost_partition - 0.2960414374601597).abs() < 1e-13);
    }

    #[test]
    fn single_cell_has_no_partition_cost() {
        let inp = inputs(50, 0.1);
        let p = counted_partition(&[1], &[50], &[3.0]);
        let report = theorem5_bound(&inp, &p, LipMode::Tightened).unwrap();
        assert_eq!(report.cost_partition, 0.0);
    }

    #[test]
    fn degenerate_point_domain_kills_transport_terms() {
        let point = Rect::new(vec![0.5, 0.5], vec![0.5, 0.5]).unwrap();
        let mut p = Partition::single_cell(point, 1).unwrap();
        p.cells_mut()[0].count = 50;
        p.cells_mut()[0].local_lip = Some(7.0);
        let inp = inputs(50, 0.1);
        let report = theorem5_bound(&inp, &p, LipMode::Tightened).unwrap();
        assert_eq!(report.cost_transport, 0.0);
        assert_eq!(report.err_transport, 0.0);
        assert_eq!(report.cost_partition, 0.0);
    }

    #[test]
    fn one_cell_partition_equals_global() {
        // The tightened and split modes must both collapse to the global
        // form on the single-cell partition.
        for mode in [LipMode::Tightened, LipMode::Split] {
            let inp = inputs(128, 0.05);
            let mut p = counted_partition(&[1], &[128], &[0.0]);
            p.cells_mut()[0].local_lip = Some(2.5);
            let a = theorem5_bound(&inp, &p, mode).unwrap();
            let diam = p.cells()[0].diameter();
            let b = global_bound(&inp, 2.5, diam, mode).unwrap();
            assert!((a.total - b.total).abs() < 1e-12, "{mode:?}");
            assert!((a.cost_transport - b.cost_transport).abs() < 1e-12);
        }
    }

    #[test]
    fn split_mode_floors_at_one() {
        let inp = inputs(64, 0.05);
        let report = global_bound(&inp, 0.0, 3.0, LipMode::Split).unwrap();
        let class = RegularityClass::holder(2, 1.0).unwrap();
        let expected = class.holder_constant().unwrap() * class.rate(64) * 3.0;
        assert!((report.cost_transport - expected).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_local_lipschitz_and_delta() {
        let inp = inputs(100, 0.05);
        let base = counted_partition(&[4], &[25, 25, 25, 25], &[1.0, 2.0, 0.5, 1.5]);
        let before = theorem5_bound(&inp, &base, LipMode::Tightened).unwrap();
        let mut bumped = base.clone();
        bumped.cells_mut()[2].local_lip = Some(4.0);
        let after = theorem5_bound(&inp, &bumped, LipMode::Tightened).unwrap();
        assert!(after.total >= before.total);

        let mut last = f64::INFINITY;
        for delta in [0.01, 0.05, 0.2, 0.5, 1.0] {
            let inp = inputs(100, delta);
            let t = theorem5_bound(&inp, &base, LipMode::Tightened).unwrap().total;
            assert!(t <= last + 1e-15);
            last = t;
        }
    }

    #[test]
    fn empty_cells_count_toward_partition_size_only() {
        let inp = inputs(100, 0.05);
        let concentrated = counted_partition(&[4], &[100, 0, 0, 0], &[1.0, 9.0, 9.0, 9.0]);
        let spread = counted_partition(&[1], &[100], &[1.0]);
        let a = theorem5_bound(&inp, &concentrated, LipMode::Tightened).unwrap();
        let b = theorem5_bound(&inp, &spread, LipMode::Tightened).unwrap();
        // Same occupied-cell structure apart from diameters; the empty cells
        // only show up through the partition cost.
        assert!(a.cost_partition > 0.0);
        assert_eq!(b.cost_partition, 0.0);
        // The count-weighted transport sum ignores the empty cells' lips.
        let mut no_lips = concentrated.clone();
        for c in no_lips.cells_mut().iter_mut().skip(1) {
            c.local_lip = None;
        }
        let a2 = theorem5_bound(&inp, &no_lips, LipMode::Tightened).unwrap();
        assert_eq!(a.cost_transport, a2.cost_transport);
    }

    #[test]
    fn missing_lip_on_occupied_cell_rejected() {
        let inp = inputs(100, 0.05);
        let mut p = counted_partition(&[2], &[50, 50], &[1.0, 1.0]);
        p.cells_mut()[1].local_lip = None;
        assert!(theorem5_bound(&inp, &p, LipMode::Tightened).is_err());
        // Counts not summing to N are rejected too.
        let p = counted_partition(&[2], &[50, 49], &[1.0, 1.0]);
        assert!(theorem5_bound(&inp, &p, LipMode::Tightened).is_err());
    }

    #[test]
    fn classification_floor_case() {
        // Zero local lips, zero train error, k = 1, L_f = 0: only the
        // concentration floor remains.
        let mut inp = BoundInputs::new(400, 0.05, 0.2, 0.0, 1.0, 2).unwrap();
        inp.gamma = Some(5.0);
        let domain = Rect::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let input_part = Partition::grid(domain, &[1, 1]).unwrap();
        let mut paired = Partition::paired(&input_part).unwrap();
        paired.cells_mut()[0].count = 150;
        paired.cells_mut()[0].local_lip = Some(0.0);
        paired.cells_mut()[1].count = 250;
        paired.cells_mut()[1].local_lip = Some(0.0);
        let report = classification_bound(&inp, &paired, 0.0).unwrap();
        let expected = (2.0 * (4.0f64 / 0.05).ln() / 400.0).sqrt();
        assert!((report.total - expected).abs() < 1e-12);
    }

    #[test]
    fn classification_gamma_scaling() {
        let domain = Rect::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let input_part = Partition::grid(domain, &[2, 2]).unwrap();
        let mut paired = Partition::paired(&input_part).unwrap();
        for (i, c) in paired.cells_mut().iter_mut().enumerate() {
            c.count = 50;
            c.local_lip = Some(1.0 + i as f64);
        }
        let mut small = BoundInputs::new(400, 0.05, 0.2, 3.0, 1.0, 2).unwrap();
        small.gamma = Some(5.0);
        let mut large = small.clone();
        large.gamma = Some(5e9);
        let a = classification_bound(&small, &paired, 0.1).unwrap();
        let b = classification_bound(&large, &paired, 0.1).unwrap();
        // Transport and deviation terms scale away with gamma.
        assert!(b.cost_transport < 1e-8 * a.cost_transport.max(1e-300));
        assert!(b.err_transport < 1e-8 * a.err_transport.max(1e-300));
        assert_eq!(a.cost_partition, b.cost_partition);
        assert!((b.total - (0.1 + b.cost_partition)).abs() < 1e-9);
    }

    #[test]
    fn manifold_examples() {
        // d~ = d + 1 with the matching constant reproduces the generic
        // assembly in the above-critical regime.
        let mut inp = BoundInputs::new(512, 0.05, 1.0, 2.0, 1.0, 2).unwrap();
        let domain = Rect::new(vec![0.0; 3], vec![1.0; 3]).unwrap();
        let mut p = Partition::grid(domain, &[2, 2, 2]).unwrap();
        for c in p.cells_mut() {
            c.count = 64;
            c.local_lip = Some(1.3);
        }
        inp.intrinsic_dim = Some(3);
        inp.manifold_constant = Some(holder_constant(3, 1.0).unwrap());
        let a = manifold_bound(&inp, &p, LipMode::Tightened).unwrap();
        let b = theorem5_bound(&inp, &p, LipMode::Tightened).unwrap();
        assert!((a.cost_transport - b.cost_transport).abs() < 1e-12);
        assert_eq!(a.err_transport, b.err_transport);

        // d~ = 1: every occupied cell contributes lip * diam / N.
        inp.intrinsic_dim = Some(1);
        inp.manifold_constant = Some(2.0);
        let c = manifold_bound(&inp, &p, LipMode::Tightened).unwrap();
        let per_cell: f64 = p
            .cells()
            .iter()
            .map(|cell| 1.3 * cell.diameter() / 512.0)
            .sum();
        assert!((c.cost_transport - 2.0 * per_cell).abs() < 1e-12);

        // Missing constant is an error.
        inp.manifold_constant = None;
        assert!(manifold_bound(&inp, &p, LipMode::Tightened).is_err());
    }

    #[test]
    fn manifold_halving_dimension_scales_cells() {
        // Halving d~ from 4 to 2 at N_P = 256 scales each cell term by
        // 256^{-1/4}.
        let r4 = 256f64.powf(-1.0 / 4.0);
        let r2 = 256f64.powf(-1.0 / 2.0);
        assert!((r2 / r4 - 256f64.powf(-0.25)).abs() < 1e-12);
    }

    #[test]
    fn shift_examples() {
        let mut inp = BoundInputs::new(256, 0.05, 1.0, 1.0, 1.0, 2).unwrap();
        inp.shift_w1 = Some(0.0);
        let with_zero = shift_bound(&inp, 2.0, 3.0, LipMode::Tightened, false).unwrap();
        let plain = global_bound(&inp, 2.0, 3.0, LipMode::Tightened).unwrap();
        assert_eq!(with_zero.shift_term, 0.0);
        assert!((with_zero.total - plain.total).abs() < 1e-15);

        inp.shift_w1 = Some(0.7);
        let shifted = shift_bound(&inp, 2.0, 3.0, LipMode::Tightened, true).unwrap();
        assert!((shifted.shift_term - 0.7).abs() < 1e-15);
        assert_eq!(shifted.provenance.shift_w1_empirical, Some(true));

        inp.shift_w1 = None;
        assert!(shift_bound(&inp, 2.0, 3.0, LipMode::Tightened, false).is_err());
    }

    #[test]
    fn rademacher_frozen_values() {
        let (t1, t2) = rademacher_complexity_terms(1, 1.0, 1.0, 1.0, 512);
        assert!((t1 - 1.0).abs() < 1e-12);
        assert!((t2 - 0.5946035575013605).abs() < 1e-12);
        // Decay exponent: scaling N by 2^(d+3) halves the complexity part.
        let (a1, _) = rademacher_complexity_terms(1, 1.0, 1.0, 1.0, 512 * 16);
        assert!((a1 - 0.5).abs() < 1e-12);
        let b = rademacher_bound(1, 1.0, 1.0, 1.0, 1.0, 1.0, 512, 0.05).unwrap();
        let expected = 4.0 * 1.0 + 16.0 * 2f64.sqrt() * (1.0f64 / 8192.0).powf(0.25)
            + (8.0 * (2.0f64 / 0.05).ln() / 512.0).sqrt();
        assert!((b - expected).abs() < 1e-12);
    }

    #[test]
    fn prop10_frozen_values() {
        let forms = prop10_closed_forms(1 << 16, 1.0, 0.05, 1.0).unwrap();
        assert!((forms.global_cost_transport - 12.0).abs() < 1e-12);
        assert!((forms.local_cost_transport - 0.3298769776932236).abs() < 1e-9);
        assert!(prop10_closed_forms(8, 1.0, 0.05, 1.0).is_err());
    }

    #[test]
    fn prop10_monotone_over_doubling_grid() {
        let mut last_local = f64::INFINITY;
        let mut last_global = 0.0;
        for j in 10..=20 {
            let forms = prop10_closed_forms(1usize << j, 1.0, 0.05, 1.0).unwrap();
            assert!(
                forms.local_total < last_local,
                "local total must strictly decrease at 2^{j}"
            );
            assert!(
                forms.global_cost_transport > last_global,
                "global transport cost must strictly increase at 2^{j}"
            );
            last_local = forms.local_total;
            last_global = forms.global_cost_transport;
        }
    }

    #[test]
    fn report_total_is_exact_sum() {
        let inp = inputs(100, 0.05);
        let p = counted_partition(&[4], &[25, 25, 25, 25], &[1.0, 2.0, 0.5, 1.5]);
        let r = theorem5_bound(&inp, &p, LipMode::Split).unwrap();
        let sum =
            r.train_error + r.cost_transport + r.err_transport + r.cost_partition + r.shift_term;
        assert_eq!(r.total, sum);
        assert!(r.csv_row(7).starts_with("thm5,100,0.05,4,"));
    }
}
