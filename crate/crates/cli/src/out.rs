//! Deterministic CSV emission. Floats use Rust's shortest round-trip
//! formatting, rows are written in a fixed order, and no timestamps are
//! recorded, so identical configs produce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub struct CsvFile {
    path: PathBuf,
    rows: Vec<String>,
}

impl CsvFile {
    pub fn new(path: PathBuf, header: &str) -> Self {
        CsvFile {
            path,
            rows: vec![header.to_string()],
        }
    }

    pub fn push(&mut self, row: String) {
        self.rows.push(row);
    }

    pub fn write(&self) -> Result<PathBuf> {
        if let Some(dir) = self.path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut file = fs::File::create(&self.path)
            .with_context(|| format!("writing {}", self.path.display()))?;
        for row in &self.rows {
            writeln!(file, "{row}")?;
        }
        Ok(self.path.clone())
    }
}

/// Write the resolved configuration next to the results.
pub fn write_meta(dir: &Path, name: &str, canonical: &str, hash: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut file = fs::File::create(dir.join(format!("{name}.meta.txt")))?;
    writeln!(file, "config_hash = {hash}")?;
    write!(file, "{canonical}")?;
    Ok(())
}

/// Mean and standard error over a slice.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
