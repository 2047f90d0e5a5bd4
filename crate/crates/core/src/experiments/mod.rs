//! Configuration-driven experiments. Each run writes a directory with the
//! resolved configuration (`config.json`), CSV tables and `summary.json`.

pub mod config;
pub mod initial;
pub mod report;
pub mod verify;

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

pub use config::{ExperimentConfig, ExperimentKind, ResolvedConfig, Tolerances, SCHEMA};
pub use initial::{generate_initial_data, h2_norm, InitialData, Slot};
pub use report::{format_number, write_csv, Check, RunStatus, RunSummary};

use crate::error::{Error, Result};
use crate::linear::{
    build_mode_matrix, certify_gap, fit_decay_exponent, fit_exponential, gap_shape_constant, log_space,
    mode_kernel_dimension, semigroup_decay_curve, spectral_abscissa, spectrum_survey, CertificateOptions,
    DecayProfile, RadialQuadrature,
};
use crate::spectral::{lebesgue_norm_samples, Grid, Transformer};
use crate::state::{
    conservation_scale, first_order_functionals, low_frequency_source, l2v_lp_norm, second_order_functionals,
    DiagnosticsContext, DiagnosticsRecord, SystemState,
};
use crate::timestep::{integrate, step_count, Integrator};
use crate::velocity::{enumerate_truncation, Truncation};

/// Resolves defaults, runs the experiment and writes its run directory.
pub fn run_experiment(cfg: &ResolvedConfig) -> Result<RunSummary> {
    let start = Instant::now();
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg)? + "\n")?;
    let mut summary = RunSummary::new(cfg);
    match cfg.experiment {
        ExperimentKind::OperatorVerify => operator_verify(cfg, dir, &mut summary)?,
        ExperimentKind::LinearSpectrum => linear_spectrum(cfg, dir, &mut summary)?,
        ExperimentKind::LinearDecay => linear_decay(cfg, dir, &mut summary)?,
        ExperimentKind::TorusRun => torus_run(cfg, dir, &mut summary)?,
        ExperimentKind::BoxRun | ExperimentKind::LpReport => box_run(cfg, dir, &mut summary)?,
    }
    summary.wall_time_s = start.elapsed().as_secs_f64();
    summary.finalize();
    summary.write(dir)?;
    Ok(summary)
}

/// Hermite degrees covered by the oracle comparison.
pub const ORACLE_DEGREES: [usize; 3] = [4, 6, 8];
/// Random inputs per operator and degree.
pub const ORACLE_SAMPLES: usize = 200;

fn operator_verify(cfg: &ResolvedConfig, dir: &Path, summary: &mut RunSummary) -> Result<()> {
    let tol = &cfg.tolerances;
    let mut deltas = Vec::new();
    for degree in ORACLE_DEGREES {
        deltas.extend(verify::operator_oracle_deltas(cfg.dim, degree, ORACLE_SAMPLES, cfg.seed)?);
    }
    for d in &deltas {
        summary.check(Check::at_most(&format!("oracle/{}/N{}", d.operator, d.degree), d.max_delta, tol.oracle));
    }
    report::write_csv_cells(
        &dir.join("operator_deltas.csv"),
        &["operator", "dim", "degree", "samples", "max_delta"],
        deltas.iter().map(|d| {
            vec![
                d.operator.clone(),
                d.dim.to_string(),
                d.degree.to_string(),
                d.samples.to_string(),
                format_number(d.max_delta),
            ]
        }),
    )?;
    let mut structural = Vec::new();
    for degree in 2..=8 {
        let s = verify::structural_defects(cfg.dim, degree, ORACLE_SAMPLES, cfg.seed)?;
        summary.check(Check::at_most(&format!("structural/lp_identity/N{degree}"), s.lp_identity, tol.structural));
        summary.check(Check::at_most(&format!("structural/idempotence/N{degree}"), s.idempotence, tol.structural));
        summary.check(Check::at_most(&format!("structural/orthogonality/N{degree}"), s.orthogonality, tol.structural));
        summary.check(Check::positive(&format!("structural/coercivity/N{degree}"), s.coercivity));
        structural.push(s);
    }
    write_csv(
        &dir.join("structural.csv"),
        &["degree", "lp_identity", "idempotence", "orthogonality", "coercivity"],
        structural
            .iter()
            .map(|s| vec![s.degree as f64, s.lp_identity, s.idempotence, s.orthogonality, s.coercivity]),
    )?;
    summary.insert("oracle_deltas", &deltas);
    summary.insert("structural", &structural);
    Ok(())
}

/// Survey wavenumbers: 50 log-spaced values of `|k|` on `[0.05, 20]`.
pub fn survey_wavenumbers() -> Vec<f64> {
    log_space(0.05, 20.0, 50)
}

fn linear_spectrum(cfg: &ResolvedConfig, dir: &Path, summary: &mut RunSummary) -> Result<()> {
    let trunc = enumerate_truncation(cfg.dim, cfg.hermite_degree)?;
    let params = cfg.model_params();
    let ks = survey_wavenumbers();
    let rows = spectrum_survey(&ks, &trunc, &params)?;
    let c = gap_shape_constant(&rows);
    let zero = build_mode_matrix(&vec![0.0; cfg.dim], &trunc, &params);
    let kernel = mode_kernel_dimension(&zero);
    let abscissa0 = spectral_abscissa(&zero, true)?;
    summary.check(Check::positive("gap_shape_constant", c));
    summary.check(Check::equals("kernel_dimension", kernel, cfg.dim + 2));
    summary.check(Check::at_most("abscissa_k0_nonconserved", abscissa0, 0.0));
    let opts = CertificateOptions {
        t_max: cfg.t_end.max(cfg.dt),
        dt: cfg.dt.max(1e-3).min(cfg.t_end.max(cfg.dt)),
        seed: cfg.seed,
        ..CertificateOptions::default()
    };
    let cert_ks = log_space(0.05, 20.0, 8);
    match certify_gap(&cert_ks, &trunc, &params, cfg.tau[3], cfg.tau[4], &opts) {
        Ok(cert) => {
            summary.check(Check::positive("lyapunov_certificate", cert.lambda_hat));
            summary.insert("certificate", &cert);
        }
        Err(Error::Certificate(best)) => {
            summary.check(Check::positive("lyapunov_certificate", best));
            summary.warnings.push(format!("no positive certificate; best lambda {best:e}"));
        }
        Err(e) => return Err(e),
    }
    write_csv(
        &dir.join("spectrum.csv"),
        &["k", "abscissa", "rate", "shape_ratio"],
        rows.iter().map(|r| vec![r.k, r.abscissa, r.rate, r.shape_ratio]),
    )?;
    summary.insert("gap_shape_constant", c);
    summary.insert("kernel_dimension", kernel);
    summary.insert("abscissa_k0_nonconserved", abscissa0);
    summary.insert("survey", &rows);
    Ok(())
}

/// Fitted exponents of the four semigroup decay curves.
#[derive(Clone, Debug, Serialize)]
pub struct DecayExponents {
    pub m0: f64,
    pub m1: f64,
    pub m0_low: f64,
    pub m1_low: f64,
}

fn linear_decay(cfg: &ResolvedConfig, dir: &Path, summary: &mut RunSummary) -> Result<()> {
    let trunc = enumerate_truncation(cfg.dim, cfg.hermite_degree)?;
    let params = cfg.model_params();
    let profile = DecayProfile::flat(&trunc);
    let steps = step_count(0.0, cfg.t_end, cfg.dt);
    let times: Vec<f64> = (0..=steps).map(|s| (s as f64 * cfg.dt).min(cfg.t_end)).collect();
    let quad = RadialQuadrature::default();
    let window = (cfg.fit_window[0], cfg.fit_window[1]);
    let mut curves = Vec::new();
    let mut exps = Vec::new();
    for (m, low) in [(0, None), (1, None), (0, Some(cfg.r0)), (1, Some(cfg.r0))] {
        let curve = semigroup_decay_curve(&trunc, &params, &profile, &times, m, &quad, low)?;
        if let Some(w) = &curve.warning {
            summary.warnings.push(w.clone());
        }
        let fit = fit_decay_exponent(&curve.times, &curve.values, window)?;
        exps.push((fit.fitted_exponent, fit.residual));
        curves.push(curve.values);
    }
    let tol = &cfg.tolerances;
    let names = ["slope_m0", "slope_m1", "slope_m0_low", "slope_m1_low"];
    for (i, (name, (e, _))) in names.iter().zip(&exps).enumerate() {
        let (target, t) = if i % 2 == 0 { (-0.75, tol.slope_m0) } else { (-1.25, tol.slope_m1) };
        summary.check(Check::within(name, *e, target, t));
    }
    write_csv(
        &dir.join("decay.csv"),
        &["t", "m0", "m1", "m0_low", "m1_low"],
        times
            .iter()
            .enumerate()
            .map(|(i, &t)| vec![t, curves[0][i], curves[1][i], curves[2][i], curves[3][i]]),
    )?;
    let e = DecayExponents {
        m0: exps[0].0,
        m1: exps[1].0,
        m0_low: exps[2].0,
        m1_low: exps[3].0,
    };
    summary.insert("fitted_exponents", &e);
    summary.insert("fit_residuals", exps.iter().map(|x| x.1).collect::<Vec<_>>());
    summary.insert("fit_window", cfg.fit_window);
    Ok(())
}

/// Per-step energy sample of a torus run.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnergySample {
    pub time: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub energy1: f64,
    /// `||nabla^2 (a^L, b^L, rho^L, u^L)||^2`.
    pub source: f64,
}

/// Results of the energy-dissipation monitor.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnergyMonitor {
    /// Largest increase of `E` between consecutive steps.
    pub max_increase: f64,
    /// Largest `lambda` with `E(t) + lambda int_0^t D <= E(0)` at every sample.
    pub lambda_fit: f64,
    /// Smallest `C >= 0` with `E1(t) <= E1(0) + C int_0^t S` at every sample;
    /// infinite if `E1` grows while the source integral is still zero.
    pub source_constant: f64,
    /// Largest `E1(t) - E1(0)`.
    pub e1_max_excess: f64,
}

/// Trapezoid running integral.
pub fn cumulative_integral(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for i in 0..times.len() {
        if i > 0 {
            acc += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
        }
        out.push(acc);
    }
    out
}

pub fn energy_monitor(samples: &[EnergySample]) -> EnergyMonitor {
    let times: Vec<f64> = samples.iter().map(|s| s.time).collect();
    let d: Vec<f64> = samples.iter().map(|s| s.dissipation).collect();
    let src: Vec<f64> = samples.iter().map(|s| s.source).collect();
    let int_d = cumulative_integral(&times, &d);
    let int_s = cumulative_integral(&times, &src);
    let max_increase = samples
        .windows(2)
        .map(|w| w[1].energy - w[0].energy)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut lambda_fit = f64::INFINITY;
    let mut source_constant: f64 = 0.0;
    let mut e1_max_excess = f64::NEG_INFINITY;
    if let Some(first) = samples.first() {
        for (i, s) in samples.iter().enumerate().skip(1) {
            if int_d[i] > 0.0 {
                lambda_fit = lambda_fit.min((first.energy - s.energy) / int_d[i]);
            }
            let excess = s.energy1 - first.energy1;
            e1_max_excess = e1_max_excess.max(excess);
            if excess > 0.0 {
                let c = if int_s[i] > 0.0 { excess / int_s[i] } else { f64::INFINITY };
                source_constant = source_constant.max(c);
            }
        }
    }
    EnergyMonitor {
        max_increase,
        lambda_fit,
        source_constant,
        e1_max_excess,
    }
}

/// Largest `|C(t) - C(0)| / (scale max(t, 1))` over the records, with
/// `scale` from [`conservation_scale`] of the initial state.
pub fn conservation_drift(records: &[DiagnosticsRecord], scale: f64) -> f64 {
    let Some(first) = records.first() else { return 0.0 };
    let c0 = first.conserved();
    records
        .iter()
        .map(|r| r.conserved().max_abs_diff(&c0) / (scale * (r.time - first.time).max(1.0)))
        .fold(0.0, f64::max)
}

fn setup(cfg: &ResolvedConfig) -> Result<(Grid, Arc<Truncation>, Integrator, DiagnosticsContext)> {
    let grid = Grid::new(cfg.dim, cfg.n_per_axis, cfg.box_length)?;
    let trunc = enumerate_truncation(cfg.dim, cfg.hermite_degree)?;
    let params = cfg.model_params();
    let integrator = Integrator::new(grid, &trunc, &params, cfg.dt, true)?;
    let ctx = DiagnosticsContext::new(grid, &trunc, params, cfg.energy_weights(), cfg.r0);
    Ok((grid, trunc, integrator, ctx))
}

fn write_diagnostics(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    write_csv(path, &DiagnosticsRecord::COLUMNS, records.iter().map(|r| r.values().to_vec()))
}

fn abort_message(e: &Error, last: Option<&DiagnosticsRecord>) -> String {
    match last {
        Some(r) => format!("{e} (last good record at t = {})", r.time),
        None => e.to_string(),
    }
}

fn torus_run(cfg: &ResolvedConfig, dir: &Path, summary: &mut RunSummary) -> Result<()> {
    let (grid, trunc, integrator, ctx) = setup(cfg)?;
    let initial = generate_initial_data(InitialData::TorusRandom, cfg.seed, cfg.epsilon, grid, &trunc)?;
    let scale = conservation_scale(&initial);
    let total = step_count(initial.time, cfg.t_end, cfg.dt);
    let every = cfg.sample_every;
    let mut records = Vec::new();
    let mut step = 0usize;
    let (samples, _, steps, abort) = integrate(&initial, cfg.t_end, &integrator, 1, |s| {
        let first = first_order_functionals(s, &ctx.params, &ctx.weights);
        let second = second_order_functionals(s, &ctx.params, &ctx.weights, ctx.r0);
        if step.is_multiple_of(every) || step == total {
            records.push(ctx.record(s)?);
        }
        step += 1;
        Ok(EnergySample {
            time: s.time,
            energy: first.energy,
            dissipation: first.dissipation,
            energy1: second.energy,
            source: low_frequency_source(s, ctx.r0),
        })
    });
    write_diagnostics(&dir.join("diagnostics.csv"), &records)?;
    let integral_s = cumulative_integral(
        &samples.iter().map(|s| s.time).collect::<Vec<_>>(),
        &samples.iter().map(|s| s.source).collect::<Vec<_>>(),
    );
    write_csv(
        &dir.join("energy_source.csv"),
        &["time", "E", "D", "E1", "source", "source_integral"],
        samples
            .iter()
            .zip(&integral_s)
            .map(|(s, i)| vec![s.time, s.energy, s.dissipation, s.energy1, s.source, *i]),
    )?;
    summary.insert("steps", steps);
    if let Some(e) = abort {
        summary.abort = Some(abort_message(&e, records.last()));
        return Ok(());
    }
    let tol = &cfg.tolerances;
    let times: Vec<f64> = samples.iter().map(|s| s.time).collect();
    let energies: Vec<f64> = samples.iter().map(|s| s.energy).collect();
    let fit = fit_exponential(&times, &energies, (cfg.fit_window[0], cfg.fit_window[1]))?;
    summary.check(Check::at_least("energy_fit_r_squared", fit.r_squared, tol.r_squared));
    summary.check(Check::positive("energy_decay_rate", fit.rate));
    let drift = conservation_drift(&records, scale);
    summary.check(Check::at_most("conservation_drift", drift, tol.conservation_drift));
    let pos_min = records.iter().map(|r| r.pos_min).fold(f64::INFINITY, f64::min);
    summary.check(Check::positive("positivity_margin", pos_min));
    let monitor = energy_monitor(&samples);
    summary.check(Check::at_most("energy_max_increase", monitor.max_increase, tol.energy_monotone));
    summary.check(Check::positive("lambda_fit", monitor.lambda_fit));
    summary.check(Check::at_most("e1_source_constant", monitor.source_constant, f64::MAX));
    summary.insert("energy_fit", fit);
    summary.insert("conservation_drift", drift);
    summary.insert("conservation_scale", scale);
    summary.insert("positivity_min", pos_min);
    summary.insert("energy_monitor", monitor);
    summary.insert("initial_energy", energies.first().copied());
    Ok(())
}

/// Exponents of the `L^p` report.
pub const LP_EXPONENTS: [f64; 6] = [2.0, 3.0, 4.0, 6.0, 10.0, f64::INFINITY];

/// `||f||_{L^2_v(L^p)} + ||(rho, u)||_{L^p}` for each `p`.
pub fn lp_norms(state: &SystemState, ps: &[f64], tr: &Transformer) -> Result<Vec<f64>> {
    let rho = tr.inverse_transform(&state.rho)?;
    let vel = state
        .vel
        .iter()
        .map(|u| tr.inverse_transform(u))
        .collect::<Result<Vec<_>>>()?;
    let mags: Vec<f64> = (0..state.grid().len())
        .map(|x| (rho[x] * rho[x] + vel.iter().map(|u| u[x] * u[x]).sum::<f64>()).sqrt())
        .collect();
    ps.iter()
        .map(|&p| Ok(l2v_lp_norm(state, p, tr)? + lebesgue_norm_samples(state.grid(), mags.iter().copied(), p)?))
        .collect()
}

/// Reference decay exponent of the combined `L^p` norm.
pub fn reference_lp_exponent(p: f64) -> f64 {
    if p <= 6.0 {
        -1.5 * (1.0 - 1.0 / p)
    } else {
        -1.25
    }
}

/// Norms at one recorded time.
#[derive(Clone, Debug, Serialize)]
pub struct LpSnapshot {
    pub time: f64,
    pub norms: Vec<f64>,
}

/// One row of the `L^p` decay table.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LpRow {
    pub p: f64,
    pub fitted_exponent: f64,
    pub reference_exponent: f64,
    pub residual: f64,
}

/// Fitted exponent per `p` over the window against the reference exponents.
pub fn lp_decay_report(snapshots: &[LpSnapshot], ps: &[f64], window: (f64, f64)) -> Result<Vec<LpRow>> {
    let used = snapshots.iter().filter(|s| s.time >= window.0 && s.time <= window.1).count();
    if used < 8 {
        return Err(Error::Fit(format!("need at least 8 snapshots in the fit window, got {used}")));
    }
    let times: Vec<f64> = snapshots.iter().map(|s| s.time).collect();
    ps.iter()
        .enumerate()
        .map(|(j, &p)| {
            let values: Vec<f64> = snapshots.iter().map(|s| s.norms[j]).collect();
            let fit = fit_decay_exponent(&times, &values, window)?;
            Ok(LpRow {
                p,
                fitted_exponent: fit.fitted_exponent,
                reference_exponent: reference_lp_exponent(p),
                residual: fit.residual,
            })
        })
        .collect()
}

fn box_run(cfg: &ResolvedConfig, dir: &Path, summary: &mut RunSummary) -> Result<()> {
    let (grid, trunc, integrator, ctx) = setup(cfg)?;
    let initial = generate_initial_data(InitialData::BoxBump, cfg.seed, cfg.epsilon, grid, &trunc)?;
    let mut records = Vec::new();
    let (snapshots, _, steps, abort) = integrate(&initial, cfg.t_end, &integrator, cfg.sample_every, |s| {
        records.push(ctx.record(s)?);
        Ok(LpSnapshot {
            time: s.time,
            norms: lp_norms(s, &LP_EXPONENTS, &ctx.transformer)?,
        })
    });
    write_diagnostics(&dir.join("diagnostics.csv"), &records)?;
    let mut header = vec!["time".to_string()];
    header.extend(LP_EXPONENTS.iter().map(|p| format!("norm_p{p}")));
    write_csv(
        &dir.join("lp_norms.csv"),
        &header.iter().map(String::as_str).collect::<Vec<_>>(),
        snapshots.iter().map(|s| {
            let mut row = vec![s.time];
            row.extend(&s.norms);
            row
        }),
    )?;
    summary.insert("steps", steps);
    if let Some(e) = abort {
        summary.abort = Some(abort_message(&e, records.last()));
        return Ok(());
    }
    let window = (cfg.fit_window[0], cfg.fit_window[1]);
    let table = lp_decay_report(&snapshots, &LP_EXPONENTS, window)?;
    let l2 = table[0].fitted_exponent;
    summary.check(Check::in_range("box_l2_slope", l2, cfg.tolerances.box_slope_range).soft());
    let pos_min = records.iter().map(|r| r.pos_min).fold(f64::INFINITY, f64::min);
    summary.check(Check::positive("positivity_margin", pos_min));
    summary.insert("l2_slope", l2);
    summary.insert("positivity_min", pos_min);
    if cfg.experiment == ExperimentKind::LpReport {
        report::write_csv_cells(
            &dir.join("lp_report.csv"),
            &["p", "fitted_exponent", "reference_exponent", "residual"],
            table.iter().map(|r| {
                vec![
                    if r.p.is_finite() { r.p.to_string() } else { "inf".into() },
                    format_number(r.fitted_exponent),
                    format_number(r.reference_exponent),
                    format_number(r.residual),
                ]
            }),
        )?;
        summary.insert(
            "lp_table",
            table
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "p": if r.p.is_finite() { serde_json::json!(r.p) } else { serde_json::json!("inf") },
                        "fitted_exponent": r.fitted_exponent,
                        "reference_exponent": r.reference_exponent,
                        "residual": r.residual,
                    })
                })
                .collect::<Vec<_>>(),
        );
    }
    Ok(())
}
