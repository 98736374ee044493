//! The experiment pipelines: each takes a resolved [`RunConfig`], writes
//! CSV results (plus a metadata file) under the configured output
//! directory, and returns the paths it wrote. Row order is fixed and all
//! numeric formatting is shortest-round-trip, so identical configs yield
//! byte-identical files.

use std::path::PathBuf;

use anyhow::{bail, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use otcert_core::bounds::{prop10_closed_forms, shift_bound};
use otcert_core::lipschitz::{local_lipschitz, grad_norm_field, Probe};
use otcert_core::measure::EmpiricalMeasure;
use otcert_core::partition::Partition;
use otcert_core::rates::RegularityClass;
use otcert_core::transport::{mc_wasserstein_mean_with_reference, w1_1d, w_alpha};
use otcert_core::learn::LossKind;

use crate::config::{RunConfig, Task};
use crate::out::{mean_stderr, write_meta, CsvFile};
use crate::pipeline::{run_classification, run_regression};

/// A rademacher comparator row in the bound-report column layout.
fn rademacher_row(n: usize, delta: f64, total: f64, seed: u64) -> String {
    format!("rademacher,{n},{delta},1,0,0,0,0,{total},{},-,{seed}", total > 1.0)
}

fn prepare(cfg: &RunConfig, name: &str) -> Result<String> {
    cfg.validate()?;
    write_meta(&cfg.out_dir, name, &cfg.canonical(), &cfg.hash())?;
    Ok(cfg.hash())
}

/// Train per seed and dataset size; report the partitioned certificate at
/// the default granularity, the global counterpart, and the Rademacher
/// comparator, alongside realized risks.
pub fn run_bound(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let hash = prepare(cfg, "bound")?;
    let mut csv = CsvFile::new(
        cfg.out_dir.join("bound.csv"),
        "experiment,task,config_hash,train_risk,test_risk,gap,theorem,N,delta,k,cost_transport,err_transport,cost_partition,shift_term,total,vacuous,mesh_per_dim,seed",
    );
    for &n in &cfg.n_list {
        for &seed in &cfg.seeds {
            let prefix = |risks: (f64, f64, f64)| {
                format!(
                    "bound,{},{hash},{},{},{}",
                    cfg.task.name(),
                    risks.0,
                    risks.1,
                    risks.2
                )
            };
            match cfg.task {
                Task::Regression => {
                    let run = run_regression(cfg, seed, n, |_| {})?;
                    let risks = (run.train_risk, run.test_risk, run.gap);
                    let local = run.theorem5(cfg, cfg.cells_x, cfg.cells_y[cfg.cells_y.len() - 1])?;
                    let global = run.global(cfg)?;
                    let rad = run.rademacher(cfg)?;
                    csv.push(format!("{},{}", prefix(risks), local.csv_row(seed)));
                    csv.push(format!("{},{}", prefix(risks), global.csv_row(seed)));
                    csv.push(format!(
                        "{},{}",
                        prefix(risks),
                        rademacher_row(n, cfg.delta, rad, seed)
                    ));
                }
                Task::Classification => {
                    let run = run_classification(cfg, seed, n, |_| {})?;
                    let risks = (run.zero_one_train, run.zero_one_test, run.gap);
                    let local = run.cor7(cfg, cfg.cells_x)?;
                    let global = run.cor7(cfg, 1)?;
                    let rad = run.rademacher(cfg)?;
                    csv.push(format!("{},{}", prefix(risks), local.csv_row(seed)));
                    csv.push(format!("{},{}", prefix(risks), global.csv_row(seed)));
                    csv.push(format!(
                        "{},{}",
                        prefix(risks),
                        rademacher_row(n, cfg.delta, rad, seed)
                    ));
                }
            }
        }
    }
    Ok(vec![csv.write()?])
}

/// Sweep partition granularity at fixed data, one training run per seed.
pub fn run_partition_sweep(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let hash = prepare(cfg, "sweep_partitions")?;
    let mut csv = CsvFile::new(
        cfg.out_dir.join("sweep_partitions.csv"),
        "experiment,task,config_hash,granularity_x,granularity_y,train_risk,test_risk,gap,theorem,N,delta,k,cost_transport,err_transport,cost_partition,shift_term,total,vacuous,mesh_per_dim,seed",
    );
    let mut summary = CsvFile::new(
        cfg.out_dir.join("sweep_partitions_summary.csv"),
        "experiment,task,config_hash,N,granularity_x,granularity_y,mean_total,stderr_total,mean_global,mean_rademacher,mean_best_total",
    );
    for &n in &cfg.n_list {
        // Per-seed totals per granularity for the summary.
        let mut totals: Vec<Vec<f64>> = Vec::new();
        let mut grid: Vec<(usize, usize)> = Vec::new();
        match cfg.task {
            Task::Regression => {
                for &my in &cfg.cells_y {
                    for &mx in &cfg.granularities {
                        grid.push((mx, my));
                    }
                }
            }
            Task::Classification => {
                for &m in &cfg.granularities {
                    grid.push((m, m));
                }
            }
        }
        totals.resize(grid.len(), Vec::new());
        let mut globals = Vec::new();
        let mut rads = Vec::new();
        let mut best_totals = Vec::new();

        for &seed in &cfg.seeds {
            match cfg.task {
                Task::Regression => {
                    let run = run_regression(cfg, seed, n, |_| {})?;
                    let prefix = |gx: usize, gy: usize| {
                        format!(
                            "sweep-partitions,regression,{hash},{gx},{gy},{},{},{}",
                            run.train_risk, run.test_risk, run.gap
                        )
                    };
                    let mut best = f64::INFINITY;
                    for (gi, &(mx, my)) in grid.iter().enumerate() {
                        let report = run.theorem5(cfg, mx, my)?;
                        best = best.min(report.total);
                        totals[gi].push(report.total);
                        csv.push(format!("{},{}", prefix(mx, my), report.csv_row(seed)));
                    }
                    let global = run.global(cfg)?;
                    globals.push(global.total);
                    csv.push(format!("{},{}", prefix(0, 0), global.csv_row(seed)));
                    let rad = run.rademacher(cfg)?;
                    rads.push(rad);
                    csv.push(format!(
                        "{},{}",
                        prefix(0, 0),
                        rademacher_row(n, cfg.delta, rad, seed)
                    ));
                    best_totals.push(best);
                }
                Task::Classification => {
                    let run = run_classification(cfg, seed, n, |_| {})?;
                    let prefix = |gx: usize, gy: usize| {
                        format!(
                            "sweep-partitions,classification,{hash},{gx},{gy},{},{},{}",
                            run.zero_one_train, run.zero_one_test, run.gap
                        )
                    };
                    let mut best = f64::INFINITY;
                    for (gi, &(m, _)) in grid.iter().enumerate() {
                        let report = run.cor7(cfg, m)?;
                        best = best.min(report.total);
                        totals[gi].push(report.total);
                        csv.push(format!("{},{}", prefix(m, m), report.csv_row(seed)));
                    }
                    let global = run.cor7(cfg, 1)?;
                    globals.push(global.total);
                    csv.push(format!("{},{}", prefix(0, 0), global.csv_row(seed)));
                    let rad = run.rademacher(cfg)?;
                    rads.push(rad);
                    csv.push(format!(
                        "{},{}",
                        prefix(0, 0),
                        rademacher_row(n, cfg.delta, rad, seed)
                    ));
                    best_totals.push(best);
                }
            }
        }
        let (g_mean, _) = mean_stderr(&globals);
        let (r_mean, _) = mean_stderr(&rads);
        let (b_mean, _) = mean_stderr(&best_totals);
        for (gi, &(gx, gy)) in grid.iter().enumerate() {
            let (mean, stderr) = mean_stderr(&totals[gi]);
            summary.push(format!(
                "sweep-partitions,{},{hash},{n},{gx},{gy},{mean},{stderr},{g_mean},{r_mean},{b_mean}",
                cfg.task.name()
            ));
        }
    }
    Ok(vec![csv.write()?, summary.write()?])
}

/// Sweep network width and depth.
pub fn run_size_sweep(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let hash = prepare(cfg, "sweep_size")?;
    let mut csv = CsvFile::new(
        cfg.out_dir.join("sweep_size.csv"),
        "experiment,task,config_hash,width,depth,params,train_risk,test_risk,gap,theorem,N,delta,k,cost_transport,err_transport,cost_partition,shift_term,total,vacuous,mesh_per_dim,seed",
    );
    for &n in &cfg.n_list {
        for &depth in &cfg.depths {
            for &width in &cfg.widths {
                let hidden = vec![width; depth];
                for &seed in &cfg.seeds {
                    let row = match cfg.task {
                        Task::Regression => {
                            let run = run_regression(cfg, seed, n, |tc| tc.hidden = hidden.clone())?;
                            let report = run
                                .theorem5(cfg, cfg.cells_x, cfg.cells_y[cfg.cells_y.len() - 1])?;
                            format!(
                                "sweep-size,regression,{hash},{width},{depth},{},{},{},{},{}",
                                run.model.parameter_count(),
                                run.train_risk,
                                run.test_risk,
                                run.gap,
                                report.csv_row(seed)
                            )
                        }
                        Task::Classification => {
                            let run =
                                run_classification(cfg, seed, n, |tc| tc.hidden = hidden.clone())?;
                            let report = run.cor7(cfg, cfg.cells_x)?;
                            format!(
                                "sweep-size,classification,{hash},{width},{depth},{},{},{},{},{}",
                                run.model.parameter_count(),
                                run.zero_one_train,
                                run.zero_one_test,
                                run.gap,
                                report.csv_row(seed)
                            )
                        }
                    };
                    csv.push(row);
                }
            }
        }
    }
    Ok(vec![csv.write()?])
}

/// Sweep the three regularization interventions: adversarial training
/// strength, weight decay, and the early-stopping iteration.
pub fn run_reg_sweep(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let hash = prepare(cfg, "sweep_reg")?;
    let mut csv = CsvFile::new(
        cfg.out_dir.join("sweep_reg.csv"),
        "experiment,task,config_hash,intervention,param,train_risk,test_risk,gap,theorem,N,delta,k,cost_transport,err_transport,cost_partition,shift_term,total,vacuous,mesh_per_dim,seed",
    );
    let interventions: Vec<(&str, Vec<f64>)> = vec![
        ("adv", cfg.adv_eps_list.clone()),
        ("wd", cfg.weight_decay_list.clone()),
        (
            "es",
            cfg.early_stop_list.iter().map(|&i| i as f64).collect(),
        ),
    ];
    for &n in &cfg.n_list {
        for (name, params) in &interventions {
            for &param in params {
                for &seed in &cfg.seeds {
                    let apply = |tc: &mut otcert_core::learn::TrainConfig| match *name {
                        "adv" => tc.adv_eps = param,
                        "wd" => tc.weight_decay = param,
                        _ => tc.iterations = (param as usize).min(tc.iterations),
                    };
                    let row = match cfg.task {
                        Task::Regression => {
                            let run = run_regression(cfg, seed, n, apply)?;
                            let report = run
                                .theorem5(cfg, cfg.cells_x, cfg.cells_y[cfg.cells_y.len() - 1])?;
                            format!(
                                "sweep-reg,regression,{hash},{name},{param},{},{},{},{}",
                                run.train_risk,
                                run.test_risk,
                                run.gap,
                                report.csv_row(seed)
                            )
                        }
                        Task::Classification => {
                            let run = run_classification(cfg, seed, n, apply)?;
                            let report = run.cor7(cfg, cfg.cells_x)?;
                            format!(
                                "sweep-reg,classification,{hash},{name},{param},{},{},{},{}",
                                run.zero_one_train,
                                run.zero_one_test,
                                run.gap,
                                report.csv_row(seed)
                            )
                        }
                    };
                    csv.push(row);
                }
            }
        }
    }
    Ok(vec![csv.write()?])
}

/// Shift certificate: translate the input distribution by a vector of the
/// requested norm, estimate the Wasserstein-1 shift on paired samples, and
/// assemble the certificate.
pub fn run_shift(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    if cfg.task != Task::Classification {
        bail!("the shift experiment runs on the classification task");
    }
    let hash = prepare(cfg, "shift")?;
    let mut csv = CsvFile::new(
        cfg.out_dir.join("shift.csv"),
        "experiment,task,config_hash,shift_norm,shift_w1,theorem,N,delta,k,cost_transport,err_transport,cost_partition,shift_term,total,vacuous,mesh_per_dim,seed",
    );
    for &n in &cfg.n_list {
        for &seed in &cfg.seeds {
            let run = run_classification(cfg, seed, n, |_| {})?;
            // Probe the ramp-composed global regularity for the certificate.
            let ramp = LossKind::Ramp { gamma: cfg.gamma };
            let composed = grad_norm_field(
                &run.model,
                Probe::LossComposed(ramp),
                &run.input_domain,
                &cfg.mesh,
                Some(&[-1.0, 1.0]),
            )?;
            let composed_lip = otcert_core::lipschitz::global_lipschitz(&composed)?;
            let mut inputs = run.bound_inputs(cfg)?;
            for &norm in &cfg.shift_norms {
                // Paired samples: the same cloud translated by v.
                let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
                let pts: Vec<Vec<f64>> = (0..cfg.shift_samples)
                    .map(|_| {
                        vec![rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)]
                    })
                    .collect();
                let base = EmpiricalMeasure::uniform(pts)?;
                let shifted = base.translated(&[norm, 0.0])?;
                let w1 = w_alpha(&base, &shifted, 1.0)?;
                inputs.shift_w1 = Some(w1);
                let report = shift_bound(
                    &inputs,
                    composed_lip,
                    run.input_domain.diameter(),
                    otcert_core::bounds::LipMode::Tightened,
                    true,
                )?;
                csv.push(format!(
                    "shift,classification,{hash},{norm},{w1},{}",
                    report.csv_row(seed)
                ));
            }
        }
    }
    Ok(vec![csv.write()?])
}

/// Monte-Carlo validation of the Wasserstein concentration envelope for
/// the uniform measure on the unit square.
pub fn run_concentration(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let hash = prepare(cfg, "concentration")?;
    let mut csv = CsvFile::new(
        cfg.out_dir.join("concentration.csv"),
        "experiment,config_hash,alpha,N,trials,mc_mean,mc_stderr,envelope,seed",
    );
    let seed = cfg.seeds[0];
    let class = RegularityClass::holder(2, 1.0)?;
    let constant = class.holder_constant()?;
    let sampler = |rng: &mut ChaCha8Rng| vec![rng.gen::<f64>(), rng.gen::<f64>()];
    for &n in &cfg.mc_n_list {
        let (mean, stderr) =
            mc_wasserstein_mean_with_reference(&sampler, n, cfg.trials, 1.0, seed, 50)?;
        let envelope = constant * 2f64.sqrt() * class.rate(n as u64);
        csv.push(format!(
            "concentration,{hash},1,{n},{},{mean},{stderr},{envelope},{seed}",
            cfg.trials
        ));
    }
    // The single-sample 1-D case with its analytic value 1/3.
    let line_sampler = |rng: &mut ChaCha8Rng| vec![rng.gen::<f64>()];
    let (mean, stderr) =
        mc_wasserstein_mean_with_reference(&line_sampler, 1, cfg.trials, 1.0, seed, 50)?;
    csv.push(format!(
        "concentration,{hash},1,1,{},{mean},{stderr},{},{seed}",
        cfg.trials,
        1.0 / 3.0
    ));
    Ok(vec![csv.write()?])
}

/// Closed forms of the divergence construction across sample sizes.
pub fn run_prop10(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let hash = prepare(cfg, "prop10")?;
    let mut csv = CsvFile::new(
        cfg.out_dir.join("prop10.csv"),
        "experiment,config_hash,N,partition_size,local_cost_transport,local_err_transport,local_cost_partition,local_total,global_cost_transport",
    );
    for &j in &cfg.prop10_exponents {
        let n = 1usize << j;
        let forms = prop10_closed_forms(n, 1.0, cfg.delta, 1.0)?;
        csv.push(format!(
            "prop10,{hash},{n},{},{},{},{},{},{}",
            2 * forms.strip_count - 1,
            forms.local_cost_transport,
            forms.local_err_transport,
            forms.local_cost_partition,
            forms.local_total,
            forms.global_cost_transport
        ));
    }
    Ok(vec![csv.write()?])
}

/// Per-cell transport-cost heatmap for a trained classifier:
/// `Lip(loss o f | P) diam(P) sqrt(N_P) / N` over an input-space grid.
pub fn run_heatmap(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    if cfg.task != Task::Classification {
        bail!("the heatmap experiment runs on the classification task");
    }
    let hash = prepare(cfg, "heatmap")?;
    let mut csv = CsvFile::new(
        cfg.out_dir.join("heatmap.csv"),
        "experiment,task,config_hash,seed,N,cell_x,cell_y,value",
    );
    let m = cfg.cells_x;
    for &n in &cfg.n_list {
        for &seed in &cfg.seeds {
            let run = run_classification(cfg, seed, n, |_| {})?;
            let values = heatmap_values(cfg, &run, m)?;
            for (cx, cy, v) in values {
                csv.push(format!(
                    "heatmap,classification,{hash},{seed},{n},{cx},{cy},{v}"
                ));
            }
        }
    }
    Ok(vec![csv.write()?])
}

/// The heatmap cell values for one trained classifier.
pub fn heatmap_values(
    cfg: &RunConfig,
    run: &crate::pipeline::ClassificationRun,
    m: usize,
) -> Result<Vec<(usize, usize, f64)>> {
    let ramp = LossKind::Ramp { gamma: cfg.gamma };
    let composed = grad_norm_field(
        &run.model,
        Probe::LossComposed(ramp),
        &run.input_domain,
        &cfg.mesh,
        Some(&[-1.0, 1.0]),
    )?;
    let input_part = Partition::grid(run.input_domain.clone(), &[m, m])?;
    let with_lips = local_lipschitz(&composed, &Partition::paired(&input_part)?)?;
    let counted = with_lips.assign_counts(&run.labeled_points())?;
    let nf = run.dataset.len() as f64;
    let cells = counted.cells();
    let mut values = Vec::with_capacity(m * m);
    for i in 0..m * m {
        let minus = &cells[2 * i];
        let plus = &cells[2 * i + 1];
        let count = (minus.count + plus.count) as f64;
        let lip = minus
            .local_lip
            .unwrap_or(0.0)
            .max(plus.local_lip.unwrap_or(0.0));
        let value = lip * minus.diameter() * count.sqrt() / nf;
        values.push((i / m, i % m, value));
    }
    Ok(values)
}

/// Check `w1_1d` is wired for CSV-loaded measures (exposed for the CLI's
/// distance subcommand as a library entry).
pub fn distance_between_csv(
    a_path: &std::path::Path,
    b_path: &std::path::Path,
    alpha: f64,
    weighted: bool,
) -> Result<f64> {
    let a = EmpiricalMeasure::read_csv(
        std::io::BufReader::new(std::fs::File::open(a_path)?),
        weighted,
    )?;
    let b = EmpiricalMeasure::read_csv(
        std::io::BufReader::new(std::fs::File::open(b_path)?),
        weighted,
    )?;
    if a.dim() == 1 && alpha == 1.0 {
        Ok(w1_1d(&a, &b)?)
    } else {
        Ok(w_alpha(&a, &b, alpha)?)
    }
}
