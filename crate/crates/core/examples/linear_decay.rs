//! Algebraic decay of the linear semigroup in three dimensions: the `L^2`
//! norm decays like `t^(-3/4)` and its gradient like `t^(-5/4)`, with or
//! without restricting to low frequencies.
//!
//! ```sh
//! cargo run --release --example linear_decay
//! ```

use kinetic_fluid::linear::{fit_decay_exponent, semigroup_decay_curve, DecayProfile, RadialQuadrature};
use kinetic_fluid::state::ModelParams;
use kinetic_fluid::velocity::enumerate_truncation;

fn main() -> kinetic_fluid::Result<()> {
    let trunc = enumerate_truncation(3, 6)?;
    let params = ModelParams::default();
    let profile = DecayProfile::flat(&trunc);
    let times: Vec<f64> = (0..=1000).map(f64::from).collect();
    let quad = RadialQuadrature::default();
    for (m, low, expected) in [(0, None, -0.75), (1, None, -1.25), (0, Some(1.0), -0.75), (1, Some(1.0), -1.25)] {
        let curve = semigroup_decay_curve(&trunc, &params, &profile, &times, m, &quad, low)?;
        let fit = fit_decay_exponent(&curve.times, &curve.values, (10.0, 1000.0))?;
        let label = if low.is_some() { "low-frequency" } else { "full" };
        println!(
            "m = {m} {label:<14} exponent {:+.4} (expected {expected:+.2})",
            fit.fitted_exponent
        );
    }
    Ok(())
}
