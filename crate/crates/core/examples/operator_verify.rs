//! Checks the ladder-based velocity operators against Gauss-Hermite
//! quadrature and prints the macro-micro structural defects.
//!
//! ```sh
//! cargo run --release --example operator_verify
//! ```

use kinetic_fluid::experiments::verify::{operator_oracle_deltas, structural_defects};

fn main() -> kinetic_fluid::Result<()> {
    let dim = 3;
    println!("{:<22} {:>3} {:>12}", "operator", "N", "max delta");
    for degree in [4, 6, 8] {
        for d in operator_oracle_deltas(dim, degree, 200, 1)? {
            println!("{:<22} {:>3} {:>12.3e}", d.operator, d.degree, d.max_delta);
        }
    }
    println!();
    println!("{:>3} {:>12} {:>12} {:>12} {:>12}", "N", "LP + P1", "P^2 - P", "<P, I-P>", "lambda_0");
    for degree in 2..=8 {
        let s = structural_defects(dim, degree, 200, 1)?;
        println!(
            "{:>3} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.6}",
            degree, s.lp_identity, s.idempotence, s.orthogonality, s.coercivity
        );
    }
    Ok(())
}
