//! Nonlinear run on the periodic torus from small random data with zero
//! conserved integrals; the energy decays exponentially and the conserved
//! triple stays put.
//!
//! ```sh
//! cargo run --release --example torus_run -- [T_END]
//! ```

use kinetic_fluid::experiments::{run_experiment, ExperimentConfig, ExperimentKind, ResolvedConfig};

fn main() -> kinetic_fluid::Result<()> {
    let mut cfg = ExperimentConfig::new(ExperimentKind::TorusRun);
    if let Some(t_end) = std::env::args().nth(1).and_then(|s| s.parse::<f64>().ok()) {
        cfg.t_end = Some(t_end);
        cfg.fit_window = Some([0.1 * t_end, t_end]);
    }
    cfg.output_dir = Some("runs/example_torus".into());
    let summary = run_experiment(&ResolvedConfig::resolve(&cfg)?)?;
    for c in &summary.checks {
        println!("{:<24} {:>14.6e}  {} {}", c.name, c.value, c.requirement, if c.pass { "ok" } else { "FAILED" });
    }
    println!("{:?} after {:.1} s; diagnostics in runs/example_torus", summary.status, summary.wall_time_s);
    Ok(())
}
