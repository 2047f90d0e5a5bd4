//! Localized bump in a large periodic box: marches the nonlinear system and
//! fits the algebraic decay of the `L^2` norm. The box is finite, so the fit
//! is a pre-asymptotic diagnostic rather than a sharp exponent.
//!
//! ```sh
//! cargo run --release --example box_run -- [N_PER_AXIS] [T_END]
//! ```

use std::f64::consts::PI;

use kinetic_fluid::experiments::{run_experiment, ExperimentConfig, ExperimentKind, ResolvedConfig};

fn main() -> kinetic_fluid::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = ExperimentConfig::new(ExperimentKind::BoxRun);
    if let Some(n) = args.next().and_then(|s| s.parse::<usize>().ok()) {
        cfg.n_per_axis = Some(n);
        cfg.box_length = Some(n as f64 * 2.0 * PI);
    }
    if let Some(t_end) = args.next().and_then(|s| s.parse::<f64>().ok()) {
        cfg.t_end = Some(t_end);
        cfg.fit_window = Some([t_end / 16.0, t_end]);
    }
    cfg.output_dir = Some("runs/example_box".into());
    let summary = run_experiment(&ResolvedConfig::resolve(&cfg)?)?;
    println!("L^2 decay slope: {}", summary.results["l2_slope"]);
    println!("{:?} after {:.1} s; series in runs/example_box", summary.status, summary.wall_time_s);
    Ok(())
}
