use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use otcert_cli::config::{Experiment, RunConfig, Task};
use otcert_cli::experiments;
use otcert_cli::svg::{render_csv, PlotSpec};

/// Generalization certificates from optimal transport: experiment runner.
#[derive(Parser)]
#[command(name = "otcert", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonFlags {
    /// Key = value configuration file; flags override file entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Task to run (regression | classification).
    #[arg(long)]
    task: Option<String>,
    /// Comma-separated seeds.
    #[arg(long)]
    seeds: Option<String>,
    /// Comma-separated dataset sizes.
    #[arg(long)]
    n: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Confidence parameter.
    #[arg(long)]
    delta: Option<f64>,
    /// Restore the full-scale training schedule (20000 iterations).
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Certificates at the default partition, with global and Rademacher columns.
    Bound(CommonFlags),
    /// Bound values across partition granularities.
    SweepPartitions(CommonFlags),
    /// Bound values across network widths and depths.
    SweepSize(CommonFlags),
    /// Bound values under adversarial training, weight decay, early stopping.
    SweepReg(CommonFlags),
    /// Distribution-shift certificates at several shift magnitudes.
    Shift(CommonFlags),
    /// Monte-Carlo check of the Wasserstein concentration envelope.
    Concentration(CommonFlags),
    /// Closed forms of the one-neuron divergence construction.
    Prop10(CommonFlags),
    /// Per-cell transport-cost heatmap for a trained classifier.
    Heatmap(CommonFlags),
    /// Render an SVG line plot from a result CSV.
    Plot {
        /// Input CSV path.
        #[arg(long)]
        csv: PathBuf,
        /// Column for the x axis.
        #[arg(long)]
        x: String,
        /// Column for the y axis.
        #[arg(long)]
        y: String,
        /// Optional column splitting rows into series.
        #[arg(long)]
        group: Option<String>,
        /// Log-scale the y axis.
        #[arg(long)]
        log_y: bool,
        /// Output directory (defaults to the CSV's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact transport distance between two CSV point clouds.
    Distance {
        a: PathBuf,
        b: PathBuf,
        /// Snowflake exponent in (0, 1].
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Treat the last CSV column as a weight.
        #[arg(long)]
        weighted: bool,
    },
}

fn resolve(experiment: Experiment, default_task: Task, flags: &CommonFlags) -> Result<RunConfig> {
    let mut cfg = RunConfig::defaults(experiment, default_task);
    if let Some(path) = &flags.config {
        cfg.apply_file(path)?;
    }
    if let Some(task) = &flags.task {
        let task = Task::parse(task)?;
        if task != cfg.task {
            // Re-derive task-dependent defaults before re-applying the file.
            cfg = RunConfig::defaults(experiment, task);
            if let Some(path) = &flags.config {
                cfg.apply_file(path)?;
            }
            cfg.task = task;
        }
    }
    if let Some(seeds) = &flags.seeds {
        cfg.apply_kv("seeds", seeds)?;
    }
    if let Some(n) = &flags.n {
        cfg.apply_kv("n", n)?;
    }
    if let Some(out) = &flags.out {
        cfg.out_dir = out.clone();
    }
    if let Some(delta) = flags.delta {
        cfg.delta = delta;
    }
    if flags.paper_scale {
        cfg.paper_scale = true;
    }
    cfg.experiment = experiment;
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let written = match cli.command {
        Command::Bound(f) => {
            experiments::run_bound(&resolve(Experiment::Bound, Task::Regression, &f)?)?
        }
        Command::SweepPartitions(f) => experiments::run_partition_sweep(&resolve(
            Experiment::PartitionSweep,
            Task::Regression,
            &f,
        )?)?,
        Command::SweepSize(f) => {
            experiments::run_size_sweep(&resolve(Experiment::SizeSweep, Task::Regression, &f)?)?
        }
        Command::SweepReg(f) => {
            experiments::run_reg_sweep(&resolve(Experiment::RegSweep, Task::Regression, &f)?)?
        }
        Command::Shift(f) => {
            experiments::run_shift(&resolve(Experiment::Shift, Task::Classification, &f)?)?
        }
        Command::Concentration(f) => experiments::run_concentration(&resolve(
            Experiment::Concentration,
            Task::Regression,
            &f,
        )?)?,
        Command::Prop10(f) => {
            experiments::run_prop10(&resolve(Experiment::Prop10, Task::Regression, &f)?)?
        }
        Command::Heatmap(f) => {
            experiments::run_heatmap(&resolve(Experiment::Heatmap, Task::Classification, &f)?)?
        }
        Command::Plot {
            csv,
            x,
            y,
            group,
            log_y,
            out,
        } => {
            let text = std::fs::read_to_string(&csv)
                .with_context(|| format!("reading {}", csv.display()))?;
            let spec = PlotSpec {
                x_col: &x,
                y_col: &y,
                group_col: group.as_deref(),
                log_y,
                title: csv.file_stem().and_then(|s| s.to_str()).unwrap_or("plot"),
            };
            let svg = render_csv(&text, &spec)?;
            let dir = out.unwrap_or_else(|| csv.parent().unwrap_or(std::path::Path::new(".")).into());
            std::fs::create_dir_all(&dir)?;
            let path = dir.join(format!(
                "{}_{}_vs_{}.svg",
                csv.file_stem().and_then(|s| s.to_str()).unwrap_or("plot"),
                y,
                x
            ));
            std::fs::write(&path, svg)?;
            vec![path]
        }
        Command::Distance {
            a,
            b,
            alpha,
            weighted,
        } => {
            let d = experiments::distance_between_csv(&a, &b, alpha, weighted)?;
            println!("{d}");
            vec![]
        }
    };
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
