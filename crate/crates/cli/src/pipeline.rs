//! Shared measurement pipeline: train a network on one of the synthetic
//! tasks, probe its gradient fields, and assemble certificates.

use anyhow::Result;

use otcert_core::bounds::{
    classification_bound, global_bound, rademacher_bound, theorem5_bound, BoundInputs,
    BoundReport, LipMode,
};
use otcert_core::learn::{
    empirical_risk, tasks, train, zero_one_risk, Dataset, LossKind, MlpModel, TrainConfig,
};
use otcert_core::lipschitz::{global_lipschitz, grad_norm_field, local_lipschitz, GradField, Probe};
use otcert_core::partition::{Partition, Rect};

use crate::config::RunConfig;

/// Offset mixed into the run seed to draw evaluation data independent of
/// the training sample.
const TEST_SEED_OFFSET: u64 = 0x9e3779b97f4a7c15;

/// Domain scale for the Rademacher comparator: both tasks live in boxes
/// that fit inside `[0, 10]^d` after translation.
pub const DOMAIN_SCALE: f64 = 10.0;

pub fn train_config(cfg: &RunConfig, seed: u64) -> TrainConfig {
    let mut tc = match cfg.task {
        crate::config::Task::Regression => TrainConfig::regression_default(seed),
        crate::config::Task::Classification => TrainConfig::classification_default(seed),
    };
    tc.iterations = cfg.effective_iterations();
    tc.hidden = cfg.hidden.clone();
    tc
}

/// One trained regression run with everything the certificates consume.
pub struct RegressionRun {
    pub model: MlpModel,
    pub dataset: Dataset,
    pub train_risk: f64,
    pub test_risk: f64,
    pub gap: f64,
    /// Gradient field of the Huber loss composed with the model over the
    /// joint (x, y) box.
    pub composed_field: GradField,
    /// Predictor-only gradient field over the input interval.
    pub predictor_field: GradField,
    pub predictor_lip: f64,
    pub composed_lip: f64,
    pub loss_sup: f64,
    pub joint_domain: Rect,
    pub samples_joint: Vec<Vec<f64>>,
}

pub fn run_regression(
    cfg: &RunConfig,
    seed: u64,
    n: usize,
    train_overrides: impl FnOnce(&mut TrainConfig),
) -> Result<RegressionRun> {
    let dataset = tasks::synth_regression(n, seed)?;
    let x_domain = tasks::regression_input_domain();
    let mut tc = train_config(cfg, seed);
    train_overrides(&mut tc);
    let (model, _history) = train(&dataset, &tc, LossKind::Huber, &x_domain, None)?;

    let train_risk = empirical_risk(&model, LossKind::Huber, &dataset)?;
    let test_set = tasks::synth_regression(cfg.test_samples, seed.wrapping_add(TEST_SEED_OFFSET))?;
    let test_risk = empirical_risk(&model, LossKind::Huber, &test_set)?;

    let joint_domain = x_domain.product(&tasks::regression_target_domain());
    let mesh_x = cfg.mesh[0];
    let composed_field = grad_norm_field(
        &model,
        Probe::LossComposed(LossKind::Huber),
        &joint_domain,
        &[mesh_x, cfg.mesh_y],
        None,
    )?;
    let predictor_field =
        grad_norm_field(&model, Probe::PredictorOnly, &x_domain, &[mesh_x], None)?;
    let predictor_lip = global_lipschitz(&predictor_field)?;
    let composed_lip = global_lipschitz(&composed_field)?;

    // Realized sup of the loss over the evaluation mesh: the residual range
    // spans the prediction range against the target box.
    let preds = prediction_range(&model, &x_domain, mesh_x)?;
    let y_lo = joint_domain.lower()[1];
    let y_hi = joint_domain.upper()[1];
    let max_residual = (preds.1 - y_lo).abs().max((y_hi - preds.0).abs());
    let loss_sup = if max_residual < 1.0 {
        max_residual * max_residual
    } else {
        max_residual
    };

    Ok(RegressionRun {
        samples_joint: dataset.joint_points(),
        gap: test_risk - train_risk,
        model,
        dataset,
        train_risk,
        test_risk,
        composed_field,
        predictor_field,
        predictor_lip,
        composed_lip,
        loss_sup,
        joint_domain,
    })
}

fn prediction_range(model: &MlpModel, domain: &Rect, mesh: usize) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for x in otcert_core::lipschitz::axis_mesh(domain.lower()[0], domain.upper()[0], mesh) {
        let p = model.forward(&[x])?;
        lo = lo.min(p);
        hi = hi.max(p);
    }
    Ok((lo, hi))
}

impl RegressionRun {
    pub fn bound_inputs(&self, n: usize, delta: f64) -> Result<BoundInputs> {
        Ok(BoundInputs::new(
            n,
            delta,
            LossKind::Huber.lipschitz(),
            self.predictor_lip,
            self.loss_sup,
            1,
        )?)
    }

    /// The partitioned certificate on an `mx x my` grid of the joint box.
    pub fn theorem5(&self, cfg: &RunConfig, mx: usize, my: usize) -> Result<BoundReport> {
        let partition = Partition::grid_with_input_dim(self.joint_domain.clone(), &[mx, my], 1)?;
        let with_lips = local_lipschitz(&self.composed_field, &partition)?;
        let counted = with_lips.assign_counts(&self.samples_joint)?;
        let inputs = self.bound_inputs(self.dataset.len(), cfg.delta)?;
        let mut report = theorem5_bound(&inputs, &counted, LipMode::Tightened)?;
        report.provenance.mesh_per_dim = vec![cfg.mesh[0], cfg.mesh_y];
        Ok(report)
    }

    pub fn global(&self, cfg: &RunConfig) -> Result<BoundReport> {
        let inputs = self.bound_inputs(self.dataset.len(), cfg.delta)?;
        let mut report = global_bound(
            &inputs,
            self.composed_lip,
            self.joint_domain.diameter(),
            LipMode::Tightened,
        )?;
        report.provenance.mesh_per_dim = vec![cfg.mesh[0], cfg.mesh_y];
        Ok(report)
    }

    pub fn rademacher(&self, cfg: &RunConfig) -> Result<f64> {
        let (lo, hi) = prediction_range(&self.model, &tasks::regression_input_domain(), cfg.mesh[0])?;
        let sup_norm = lo.abs().max(hi.abs()).max(1e-9);
        Ok(rademacher_bound(
            1,
            sup_norm,
            DOMAIN_SCALE,
            self.predictor_lip.max(1e-9),
            LossKind::Huber.lipschitz(),
            self.loss_sup,
            self.dataset.len(),
            cfg.delta,
        )?)
    }
}

/// One trained classification run.
pub struct ClassificationRun {
    pub model: MlpModel,
    pub dataset: Dataset,
    pub ramp_train_error: f64,
    pub zero_one_train: f64,
    pub zero_one_test: f64,
    pub gap: f64,
    pub predictor_field: GradField,
    pub predictor_lip: f64,
    pub logit_sup: f64,
    pub input_domain: Rect,
}

pub fn run_classification(
    cfg: &RunConfig,
    seed: u64,
    n: usize,
    train_overrides: impl FnOnce(&mut TrainConfig),
) -> Result<ClassificationRun> {
    run_classification_with_loss(cfg, seed, n, LossKind::CrossEntropy, train_overrides)
}

/// [`run_classification`] with an explicit training loss.
pub fn run_classification_with_loss(
    cfg: &RunConfig,
    seed: u64,
    n: usize,
    train_loss: LossKind,
    train_overrides: impl FnOnce(&mut TrainConfig),
) -> Result<ClassificationRun> {
    let dataset = tasks::synth_classification(n, seed)?;
    let input_domain = tasks::classification_input_domain();
    let mut tc = train_config(cfg, seed);
    train_overrides(&mut tc);
    let (model, _history) = train(&dataset, &tc, train_loss, &input_domain, None)?;

    let ramp = LossKind::Ramp { gamma: cfg.gamma };
    let ramp_train_error = empirical_risk(&model, ramp, &dataset)?;
    let zero_one_train = zero_one_risk(&model, &dataset)?;
    let test_set =
        tasks::synth_classification(cfg.test_samples, seed.wrapping_add(TEST_SEED_OFFSET))?;
    let zero_one_test = zero_one_risk(&model, &test_set)?;

    let predictor_field =
        grad_norm_field(&model, Probe::PredictorOnly, &input_domain, &cfg.mesh, None)?;
    let predictor_lip = global_lipschitz(&predictor_field)?;
    let mut logit_sup = 0.0f64;
    for p in predictor_field.points() {
        logit_sup = logit_sup.max(model.forward(p)?.abs());
    }

    Ok(ClassificationRun {
        gap: zero_one_test - zero_one_train,
        zero_one_train,
        model,
        dataset,
        ramp_train_error,
        zero_one_test,
        predictor_field,
        predictor_lip,
        logit_sup,
        input_domain,
    })
}

impl ClassificationRun {
    pub fn bound_inputs(&self, cfg: &RunConfig) -> Result<BoundInputs> {
        let ramp = LossKind::Ramp { gamma: cfg.gamma };
        let mut inputs = BoundInputs::new(
            self.dataset.len(),
            cfg.delta,
            ramp.lipschitz(),
            self.predictor_lip,
            1.0, // the ramp is bounded by one
            2,
        )?;
        inputs.gamma = Some(cfg.gamma);
        Ok(inputs)
    }

    /// Labeled sample cloud `(x1, x2, y)` for paired-partition counting.
    pub fn labeled_points(&self) -> Vec<Vec<f64>> {
        self.dataset.joint_points()
    }

    /// The classification certificate on an `m x m` paired partition.
    pub fn cor7(&self, cfg: &RunConfig, m: usize) -> Result<BoundReport> {
        let input_part = Partition::grid(self.input_domain.clone(), &[m, m])?;
        let with_lips = local_lipschitz(&self.predictor_field, &input_part)?;
        let paired = Partition::paired(&with_lips)?;
        let counted = paired.assign_counts(&self.labeled_points())?;
        let inputs = self.bound_inputs(cfg)?;
        let mut report = classification_bound(&inputs, &counted, self.ramp_train_error)?;
        report.provenance.mesh_per_dim = cfg.mesh.clone();
        Ok(report)
    }

    pub fn rademacher(&self, cfg: &RunConfig) -> Result<f64> {
        Ok(rademacher_bound(
            2,
            self.logit_sup.max(1e-9),
            DOMAIN_SCALE,
            self.predictor_lip.max(1e-9),
            LossKind::Ramp { gamma: cfg.gamma }.lipschitz(),
            1.0,
            self.dataset.len(),
            cfg.delta,
        )?)
    }
}
