//! Run-directory outputs: CSV tables and the JSON summary.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::Result;
use crate::experiments::config::ResolvedConfig;

/// Decimal with 17 significant digits.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Writes a header row and numeric rows.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|x| format_number(*x)))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a header row and rows of preformatted cells.
pub fn write_csv_cells(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// One declared check of a run.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// The condition `value` must satisfy, e.g. `<= 1e-10`.
    pub requirement: String,
    pub pass: bool,
    /// Soft checks are reported but do not decide the exit status.
    pub hard: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            requirement: format!("<= {limit:e}"),
            pass: value <= limit,
            hard: true,
        }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            requirement: format!(">= {limit:e}"),
            pass: value >= limit,
            hard: true,
        }
    }

    pub fn positive(name: &str, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            requirement: "> 0".into(),
            pass: value > 0.0,
            hard: true,
        }
    }

    pub fn within(name: &str, value: f64, target: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            requirement: format!("{target} +- {tol}"),
            pass: (value - target).abs() <= tol,
            hard: true,
        }
    }

    pub fn in_range(name: &str, value: f64, range: [f64; 2]) -> Self {
        Self {
            name: name.into(),
            value,
            requirement: format!("in [{}, {}]", range[0], range[1]),
            pass: value >= range[0] && value <= range[1],
            hard: true,
        }
    }

    pub fn equals(name: &str, value: usize, target: usize) -> Self {
        Self {
            name: name.into(),
            value: value as f64,
            requirement: format!("== {target}"),
            pass: value == target,
            hard: true,
        }
    }

    pub fn soft(mut self) -> Self {
        self.hard = false;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pass,
    Fail,
    Aborted,
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub experiment: String,
    pub status: RunStatus,
    pub checks: Vec<Check>,
    pub results: Map<String, Value>,
    pub warnings: Vec<String>,
    pub abort: Option<String>,
    pub seed: u64,
    pub wall_time_s: f64,
    pub config: ResolvedConfig,
}

impl RunSummary {
    pub fn new(config: &ResolvedConfig) -> Self {
        Self {
            experiment: config.experiment.name().into(),
            status: RunStatus::Pass,
            checks: Vec::new(),
            results: Map::new(),
            warnings: Vec::new(),
            abort: None,
            seed: config.seed,
            wall_time_s: 0.0,
            config: config.clone(),
        }
    }

    pub fn insert(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.results.insert(key.into(), v);
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn finalize(&mut self) {
        self.status = if self.abort.is_some() {
            RunStatus::Aborted
        } else if self.checks.iter().all(|c| c.pass || !c.hard) {
            RunStatus::Pass
        } else {
            RunStatus::Fail
        };
    }

    pub fn passed(&self) -> bool {
        self.status == RunStatus::Pass
    }

    /// Process exit code: 0 pass, 1 check failure, 3 runtime abort.
    pub fn exit_code(&self) -> i32 {
        match self.status {
            RunStatus::Pass => 0,
            RunStatus::Fail => 1,
            RunStatus::Aborted => 3,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
