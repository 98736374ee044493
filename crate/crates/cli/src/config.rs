//! Run configuration: a plain `key = value` file with CLI overrides.
//!
//! Every resolved config serializes to a canonical string; its hash is
//! stamped into each CSV row so reruns are attributable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Bound,
    PartitionSweep,
    SizeSweep,
    RegSweep,
    Shift,
    Concentration,
    Prop10,
    Heatmap,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Bound => "bound",
            Experiment::PartitionSweep => "sweep-partitions",
            Experiment::SizeSweep => "sweep-size",
            Experiment::RegSweep => "sweep-reg",
            Experiment::Shift => "shift",
            Experiment::Concentration => "concentration",
            Experiment::Prop10 => "prop10",
            Experiment::Heatmap => "heatmap",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "bound" => Experiment::Bound,
            "sweep-partitions" => Experiment::PartitionSweep,
            "sweep-size" => Experiment::SizeSweep,
            "sweep-reg" => Experiment::RegSweep,
            "shift" => Experiment::Shift,
            "concentration" => Experiment::Concentration,
            "prop10" => Experiment::Prop10,
            "heatmap" => Experiment::Heatmap,
            other => bail!("unknown experiment '{other}'"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Regression,
    Classification,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "regression" => Task::Regression,
            "classification" => Task::Classification,
            other => bail!("unknown task '{other}'"),
        })
    }
}

/// Fully resolved run configuration. Defaults mirror the experiment setup
/// (learning rate 0.05 decayed by 0.85 per 1000 iterations, batch 8/16,
/// three hidden layers of width 64, ramp margin 5, confidence 0.05) at
/// desk scale: 2000 training iterations unless `paper_scale` restores the
/// full 20000.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub task: Task,
    pub seeds: Vec<u64>,
    pub n_list: Vec<usize>,
    pub delta: f64,
    pub out_dir: PathBuf,
    pub paper_scale: bool,
    pub iterations: usize,
    pub hidden: Vec<usize>,
    pub gamma: f64,
    /// Mesh resolution per input axis for gradient fields.
    pub mesh: Vec<usize>,
    /// Mesh resolution along the target axis for joint (x, y) fields.
    pub mesh_y: usize,
    /// Partition granularities swept along the input axes.
    pub granularities: Vec<usize>,
    /// Cells along the target axis (regression partitions).
    pub cells_y: Vec<usize>,
    /// Default partition granularity for single-bound runs.
    pub cells_x: usize,
    pub widths: Vec<usize>,
    pub depths: Vec<usize>,
    pub adv_eps_list: Vec<f64>,
    pub weight_decay_list: Vec<f64>,
    pub early_stop_list: Vec<usize>,
    pub shift_norms: Vec<f64>,
    pub shift_samples: usize,
    pub trials: usize,
    pub mc_n_list: Vec<usize>,
    pub prop10_exponents: Vec<u32>,
    pub test_samples: usize,
}

impl RunConfig {
    pub fn defaults(experiment: Experiment, task: Task) -> Self {
        RunConfig {
            experiment,
            task,
            seeds: (0..10).collect(),
            n_list: vec![2560],
            delta: 0.05,
            out_dir: PathBuf::from("runs").join(experiment.name()),
            paper_scale: false,
            iterations: 2000,
            hidden: vec![64, 64, 64],
            gamma: 5.0,
            mesh: match task {
                Task::Regression => vec![512],
                Task::Classification => vec![256, 256],
            },
            mesh_y: 64,
            granularities: match task {
                Task::Regression => vec![1, 2, 4, 8, 16, 32, 64],
                Task::Classification => vec![1, 2, 4, 6, 8, 10, 14, 18, 24, 30],
            },
            cells_y: vec![1, 5],
            cells_x: match task {
                Task::Regression => 5,
                Task::Classification => 30,
            },
            widths: vec![32, 64, 128, 256],
            depths: vec![1, 2, 3, 4],
            adv_eps_list: vec![0.0, 0.05, 0.2, 0.5, 1.0],
            weight_decay_list: vec![0.0, 1e-4, 1e-3, 1e-2, 1e-1],
            early_stop_list: vec![250, 500, 1000, 2000],
            shift_norms: vec![0.0, 0.5, 1.0],
            shift_samples: 256,
            trials: 200,
            mc_n_list: vec![16, 64, 256, 1024],
            prop10_exponents: (10..=20).collect(),
            test_samples: 100_000,
        }
    }

    /// Training iterations after the paper-scale switch.
    pub fn effective_iterations(&self) -> usize {
        if self.paper_scale {
            20_000
        } else {
            self.iterations
        }
    }

    /// Canonical one-line-per-key rendering; also what gets hashed.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("experiment", self.experiment.name().into());
        put("task", self.task.name().into());
        put("seeds", join(&self.seeds));
        put("n", join(&self.n_list));
        put("delta", format!("{}", self.delta));
        put("paper_scale", format!("{}", self.paper_scale));
        put("iterations", format!("{}", self.effective_iterations()));
        put("hidden", join(&self.hidden));
        put("gamma", format!("{}", self.gamma));
        put("mesh", join(&self.mesh));
        put("mesh_y", format!("{}", self.mesh_y));
        put("granularities", join(&self.granularities));
        put("cells_y", join(&self.cells_y));
        put("cells_x", format!("{}", self.cells_x));
        put("widths", join(&self.widths));
        put("depths", join(&self.depths));
        put("adv_eps", join(&self.adv_eps_list));
        put("weight_decay", join(&self.weight_decay_list));
        put("early_stop", join(&self.early_stop_list));
        put("shift_norms", join(&self.shift_norms));
        put("shift_samples", format!("{}", self.shift_samples));
        put("trials", format!("{}", self.trials));
        put("mc_n", join(&self.mc_n_list));
        put("prop10_exponents", join(&self.prop10_exponents));
        put("test_samples", format!("{}", self.test_samples));
        s
    }

    /// FNV-1a hash of the canonical rendering, hex-encoded.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in self.canonical().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }

    /// Merge `key = value` lines from a config file into this config.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut pairs = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected 'key = value'", lineno + 1))?;
            pairs.insert(k.trim().to_string(), v.trim().to_string());
        }
        for (k, v) in pairs {
            self.apply_kv(&k, &v)
                .with_context(|| format!("config key '{k}'"))?;
        }
        Ok(())
    }

    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => self.experiment = Experiment::parse(value)?,
            "task" => self.task = Task::parse(value)?,
            "seeds" => self.seeds = parse_list(value)?,
            "n" => self.n_list = parse_list(value)?,
            "delta" => self.delta = value.parse()?,
            "out" => self.out_dir = PathBuf::from(value),
            "paper_scale" => self.paper_scale = value.parse()?,
            "iterations" => self.iterations = value.parse()?,
            "hidden" => self.hidden = parse_list(value)?,
            "gamma" => self.gamma = value.parse()?,
            "mesh" => self.mesh = parse_list(value)?,
            "mesh_y" => self.mesh_y = value.parse()?,
            "granularities" => self.granularities = parse_list(value)?,
            "cells_y" => self.cells_y = parse_list(value)?,
            "cells_x" => self.cells_x = value.parse()?,
            "widths" => self.widths = parse_list(value)?,
            "depths" => self.depths = parse_list(value)?,
            "adv_eps" => self.adv_eps_list = parse_list(value)?,
            "weight_decay" => self.weight_decay_list = parse_list(value)?,
            "early_stop" => self.early_stop_list = parse_list(value)?,
            "shift_norms" => self.shift_norms = parse_list(value)?,
            "shift_samples" => self.shift_samples = value.parse()?,
            "trials" => self.trials = value.parse()?,
            "mc_n" => self.mc_n_list = parse_list(value)?,
            "prop10_exponents" => self.prop10_exponents = parse_list(value)?,
            "test_samples" => self.test_samples = value.parse()?,
            other => bail!("unknown key '{other}'"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("need at least one seed");
        }
        if self.n_list.is_empty() {
            bail!("need at least one dataset size");
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            bail!("delta must lie in (0, 1]");
        }
        Ok(())
    }
}

fn join<T: std::fmt::Display>(values: &[T]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    s.split(',')
        .map(|tok| tok.trim().parse::<T>().map_err(Into::into))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_roundtrip_and_hash_stability() {
        let mut cfg = RunConfig::defaults(Experiment::Bound, Task::Regression);
        let h0 = cfg.hash();
        cfg.apply_kv("seeds", "1,2,3").unwrap();
        assert_ne!(cfg.hash(), h0);
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        let again = cfg.hash();
        assert_eq!(cfg.hash(), again);
    }

    #[test]
    fn file_parsing_with_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# comment\n n = 128, 256 # trailing\n delta = 0.1\n").unwrap();
        let mut cfg = RunConfig::defaults(Experiment::Bound, Task::Regression);
        cfg.apply_file(&path).unwrap();
        assert_eq!(cfg.n_list, vec![128, 256]);
        assert_eq!(cfg.delta, 0.1);
        std::fs::write(&path, "bogus_key = 3\n").unwrap();
        assert!(cfg.apply_file(&path).is_err());
    }
}
