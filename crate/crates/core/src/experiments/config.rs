//! JSON experiment configuration: the raw document, per-experiment defaults
//! and validation.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{EnergyWeights, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    OperatorVerify,
    LinearSpectrum,
    LinearDecay,
    TorusRun,
    BoxRun,
    LpReport,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::OperatorVerify => "operator_verify",
            Self::LinearSpectrum => "linear_spectrum",
            Self::LinearDecay => "linear_decay",
            Self::TorusRun => "torus_run",
            Self::BoxRun => "box_run",
            Self::LpReport => "lp_report",
        }
    }
}

/// Optional tolerance overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    pub oracle: Option<f64>,
    pub structural: Option<f64>,
    pub slope_m0: Option<f64>,
    pub slope_m1: Option<f64>,
    pub r_squared: Option<f64>,
    pub conservation_drift: Option<f64>,
    pub energy_monotone: Option<f64>,
    pub box_slope_range: Option<[f64; 2]>,
}

/// The configuration document as written; omitted fields take
/// per-experiment defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub dim: Option<usize>,
    pub n_per_axis: Option<usize>,
    pub box_length: Option<f64>,
    pub hermite_degree: Option<usize>,
    pub mu: Option<f64>,
    pub gamma: Option<f64>,
    pub c0: Option<f64>,
    pub r0: Option<f64>,
    pub tau: Option<[f64; 7]>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub sample_every: Option<usize>,
    pub fit_window: Option<[f64; 2]>,
    pub tolerances: Option<ToleranceConfig>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// A document with only the experiment set.
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            dim: None,
            n_per_axis: None,
            box_length: None,
            hermite_degree: None,
            mu: None,
            gamma: None,
            c0: None,
            r0: None,
            tau: None,
            dt: None,
            t_end: None,
            epsilon: None,
            seed: None,
            sample_every: None,
            fit_window: None,
            tolerances: None,
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }
}

/// Every tolerance with its value filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub oracle: f64,
    pub structural: f64,
    pub slope_m0: f64,
    pub slope_m1: f64,
    pub r_squared: f64,
    pub conservation_drift: f64,
    pub energy_monotone: f64,
    pub box_slope_range: [f64; 2],
}

impl Tolerances {
    fn resolve(t: Option<&ToleranceConfig>) -> Self {
        let d = ToleranceConfig::default();
        let t = t.unwrap_or(&d);
        Self {
            oracle: t.oracle.unwrap_or(1e-10),
            structural: t.structural.unwrap_or(1e-14),
            slope_m0: t.slope_m0.unwrap_or(0.08),
            slope_m1: t.slope_m1.unwrap_or(0.10),
            r_squared: t.r_squared.unwrap_or(0.99),
            conservation_drift: t.conservation_drift.unwrap_or(1e-8),
            energy_monotone: t.energy_monotone.unwrap_or(1e-9),
            box_slope_range: t.box_slope_range.unwrap_or([-0.95, -0.55]),
        }
    }
}

/// Fully resolved configuration; this is what runs consume and echo.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub experiment: ExperimentKind,
    pub dim: usize,
    pub n_per_axis: usize,
    pub box_length: f64,
    pub hermite_degree: usize,
    pub mu: f64,
    pub gamma: f64,
    pub c0: f64,
    /// Low/high cutoff radius in physical wavenumber units.
    pub r0: f64,
    pub tau: [f64; 7],
    pub dt: f64,
    pub t_end: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub sample_every: usize,
    pub fit_window: [f64; 2],
    pub tolerances: Tolerances,
    pub output_dir: PathBuf,
}

fn invalid(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl ResolvedConfig {
    /// Fills defaults for the chosen experiment and validates every field.
    pub fn resolve(cfg: &ExperimentConfig) -> Result<Self> {
        use ExperimentKind::*;
        let kind = cfg.experiment;
        let (n, length, degree, dt, t_end, window, every) = match kind {
            OperatorVerify => (8, 2.0 * PI, 6, 0.01, 0.0, [0.0, 0.0], 1),
            LinearSpectrum => (8, 2.0 * PI, 6, 0.01, 50.0, [0.0, 50.0], 1),
            LinearDecay => (8, 2.0 * PI, 6, 1.0, 1000.0, [10.0, 1000.0], 1),
            TorusRun => (16, 2.0 * PI, 4, 0.01, 50.0, [5.0, 50.0], 10),
            BoxRun | LpReport => (64, 64.0 * 2.0 * PI, 2, 0.1, 80.0, [5.0, 80.0], 10),
        };
        let defaults = EnergyWeights::default();
        let model = ModelParams::default();
        let r = Self {
            experiment: kind,
            dim: cfg.dim.unwrap_or(3),
            n_per_axis: cfg.n_per_axis.unwrap_or(n),
            box_length: cfg.box_length.unwrap_or(length),
            hermite_degree: cfg.hermite_degree.unwrap_or(degree),
            mu: cfg.mu.unwrap_or(model.mu),
            gamma: cfg.gamma.unwrap_or(model.gamma),
            c0: cfg.c0.unwrap_or(model.c0),
            r0: cfg.r0.unwrap_or(1.0),
            tau: cfg.tau.unwrap_or(defaults.tau),
            dt: cfg.dt.unwrap_or(dt),
            t_end: cfg.t_end.unwrap_or(t_end),
            epsilon: cfg.epsilon.unwrap_or(1e-2),
            seed: cfg.seed.unwrap_or(20240601),
            sample_every: cfg.sample_every.unwrap_or(every),
            fit_window: cfg.fit_window.unwrap_or(window),
            tolerances: Tolerances::resolve(cfg.tolerances.as_ref()),
            output_dir: cfg
                .output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("runs").join(kind.name())),
        };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(invalid("dim", format!("must be 1, 2 or 3, got {}", self.dim)));
        }
        if matches!(self.experiment, ExperimentKind::LinearDecay | ExperimentKind::BoxRun | ExperimentKind::LpReport)
            && self.dim != 3
        {
            return Err(invalid("dim", "this experiment is three-dimensional"));
        }
        if self.n_per_axis < 8 || !self.n_per_axis.is_power_of_two() {
            return Err(invalid("n_per_axis", format!("must be a power of two >= 8, got {}", self.n_per_axis)));
        }
        if !(self.box_length > 0.0 && self.box_length.is_finite()) {
            return Err(invalid("box_length", "must be positive"));
        }
        if !(2..=crate::velocity::MAX_DEGREE).contains(&self.hermite_degree) {
            return Err(invalid(
                "hermite_degree",
                format!("must lie in 2..={}, got {}", crate::velocity::MAX_DEGREE, self.hermite_degree),
            ));
        }
        self.model_params().validate().map_err(|e| invalid("mu/gamma/c0", e.to_string()))?;
        self.energy_weights().validate().map_err(|e| invalid("tau", e.to_string()))?;
        if !(self.r0 > 0.0) {
            return Err(invalid("r0", "must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(invalid("t_end", "must be nonnegative"));
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon", "must be positive"));
        }
        if self.sample_every == 0 {
            return Err(invalid("sample_every", "must be at least 1"));
        }
        if !(self.fit_window[0] <= self.fit_window[1]) {
            return Err(invalid("fit_window", "start must not exceed end"));
        }
        let r = self.tolerances.box_slope_range;
        if !(r[0] <= r[1]) {
            return Err(invalid("tolerances.box_slope_range", "lower bound exceeds upper bound"));
        }
        Ok(())
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            mu: self.mu,
            gamma: self.gamma,
            c0: self.c0,
        }
    }

    pub fn energy_weights(&self) -> EnergyWeights {
        EnergyWeights {
            tau: self.tau,
            ..EnergyWeights::default()
        }
    }
}

/// Human-readable schema, listed by `--help`.
pub const SCHEMA: &str = "\
Configuration: one JSON object; unknown fields are rejected.
  experiment      operator_verify | linear_spectrum | linear_decay | torus_run | box_run | lp_report (required)
  dim             spatial dimension 1..3 (default 3)
  n_per_axis      grid points per axis, power of two >= 8
  box_length      period L of the box
  hermite_degree  total Hermite degree N, 2..12
  mu, gamma, c0   viscosity and pressure law P(n) = c0 n^gamma (defaults 1, 1.4, 1)
  r0              low/high frequency cutoff radius, physical wavenumber (default 1)
  tau             [tau1, ..., tau7] energy weights
  dt, t_end       time step and final time
  epsilon         initial-data amplitude
  seed            random seed
  sample_every    steps between recorded samples
  fit_window      [t_start, t_end] used by the decay fits
  tolerances      {oracle, structural, slope_m0, slope_m1, r_squared,
                   conservation_drift, energy_monotone, box_slope_range}
  output_dir      run directory";
