//! `L^p` decay table of a box run: fitted exponents of
//! `||f||_{L^2_v(L^p)} + ||(rho, u)||_{L^p}` beside the reference exponents
//! `-3/2 (1 - 1/p)` for `p <= 6` and `-5/4` beyond.
//!
//! ```sh
//! cargo run --release --example lp_report -- [N_PER_AXIS] [T_END]
//! ```

use std::f64::consts::PI;

use kinetic_fluid::experiments::{run_experiment, ExperimentConfig, ExperimentKind, ResolvedConfig};

fn main() -> kinetic_fluid::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = ExperimentConfig::new(ExperimentKind::LpReport);
    if let Some(n) = args.next().and_then(|s| s.parse::<usize>().ok()) {
        cfg.n_per_axis = Some(n);
        cfg.box_length = Some(n as f64 * 2.0 * PI);
    }
    if let Some(t_end) = args.next().and_then(|s| s.parse::<f64>().ok()) {
        cfg.t_end = Some(t_end);
        cfg.fit_window = Some([t_end / 16.0, t_end]);
    }
    cfg.output_dir = Some("runs/example_lp".into());
    let summary = run_experiment(&ResolvedConfig::resolve(&cfg)?)?;
    println!("{:>6} {:>10} {:>10}", "p", "fitted", "reference");
    if let Some(rows) = summary.results["lp_table"].as_array() {
        for r in rows {
            println!("{:>6} {:>10.4} {:>10.4}", r["p"].to_string(), r["fitted_exponent"].as_f64().unwrap_or(f64::NAN), r["reference_exponent"].as_f64().unwrap_or(f64::NAN));
        }
    }
    println!("{:?} after {:.1} s", summary.status, summary.wall_time_s);
    Ok(())
}
