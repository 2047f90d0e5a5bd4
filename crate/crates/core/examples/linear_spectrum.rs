//! Spectral gap of the linearized system per wavenumber, the conserved kernel
//! at `k = 0`, and a sampled certificate for the per-mode Lyapunov functional.
//!
//! ```sh
//! cargo run --release --example linear_spectrum
//! ```

use kinetic_fluid::linear::{
    build_mode_matrix, certify_gap, gap_shape_constant, log_space, mode_kernel_dimension, spectrum_survey,
    CertificateOptions,
};
use kinetic_fluid::state::{EnergyWeights, ModelParams};
use kinetic_fluid::velocity::enumerate_truncation;

fn main() -> kinetic_fluid::Result<()> {
    let trunc = enumerate_truncation(3, 6)?;
    let params = ModelParams::default();
    let rows = spectrum_survey(&log_space(0.05, 20.0, 50), &trunc, &params)?;
    println!("{:>10} {:>12} {:>12}", "|k|", "rate", "rate/shape");
    for r in rows.iter().step_by(5) {
        println!("{:>10.4} {:>12.5e} {:>12.5}", r.k, r.rate, r.shape_ratio);
    }
    println!("gap shape constant c = {:.4}", gap_shape_constant(&rows));

    let zero = build_mode_matrix(&[0.0; 3], &trunc, &params);
    println!("kernel dimension at k = 0: {}", mode_kernel_dimension(&zero));

    let w = EnergyWeights::default();
    let cert = certify_gap(
        &log_space(0.05, 20.0, 8),
        &trunc,
        &params,
        w.tau(4),
        w.tau(5),
        &CertificateOptions::default(),
    )?;
    println!(
        "Lyapunov certificate: lambda_hat = {:.4} at tau4 = {}, tau5 = {}",
        cert.lambda_hat, cert.tau4, cert.tau5
    );
    Ok(())
}
