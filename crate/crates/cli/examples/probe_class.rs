use otcert_cli::config::{Experiment, RunConfig, Task};
use otcert_cli::pipeline::run_classification_with_loss;
use otcert_core::learn::LossKind;
use otcert_core::lipschitz::local_lipschitz;
use otcert_core::partition::Partition;

fn main() -> anyhow::Result<()> {
    let n = 2560;
    let ramp = LossKind::Ramp { gamma: 5.0 };
    for &(lr, wd, iters) in &[
        (0.005, 0.0f64, 3000usize),
        (0.005, 0.0, 6000),
        (0.003, 0.0, 5000),
        (0.008, 0.0, 3000),
        (0.002, 0.0, 6000),
    ] {
        let mut cfg = RunConfig::defaults(Experiment::Bound, Task::Classification);
        cfg.iterations = iters;
        let mut line = format!("lr={lr} wd={wd} it={iters}:");
        for seed in 0..2u64 {
            let run = run_classification_with_loss(&cfg, seed, n, ramp, |tc| {
                tc.lr = lr;
                tc.weight_decay = wd;
            })?;
            let part = Partition::grid(run.input_domain.clone(), &[30, 30]).unwrap();
            let filled = local_lipschitz(&run.predictor_field, &part).unwrap();
            let mut lips: Vec<f64> =
                filled.cells().iter().map(|c| c.local_lip.unwrap()).collect();
            lips.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut best = f64::INFINITY;
            for &m in &cfg.granularities {
                best = best.min(run.cor7(&cfg, m)?.total);
            }
            let global = run.cor7(&cfg, 1)?.total;
            line += &format!(
                " [s{seed}: med={:.2} q90={:.2} max={:.1} sup={:.0} ramp={:.4} best={:.2} glob={:.1} r={:.1}]",
                lips[450], lips[810], run.predictor_lip, run.logit_sup, run.ramp_train_error,
                best, global, global / best
            );
        }
        println!("{line}");
    }
    Ok(())
}
