//! Fourier-Hermite pseudo-spectral simulation and linear analysis of the
//! compressible Navier-Stokes / Vlasov-Fokker-Planck system with
//! density-dependent friction, written in perturbation variables `(f, rho, u)`
//! around the equilibrium `(M, 1, 0)`.
//!
//! Layers, bottom up:
//!
//! * [`velocity`]: Hermite eigenbasis of the linearized Fokker-Planck
//!   operator, ladder algebra, macro-micro split, quadrature reference.
//! * [`spectral`]: periodic grids, FFTs, dealiased products, cutoffs, norms.
//! * [`state`]: the system state and every energy/dissipation functional.
//! * [`dynamics`]: linear and nonlinear right-hand sides.
//! * [`linalg`]: dense matrix exponential and `phi` functions.
//! * [`linear`]: per-wavenumber mode matrices, spectral gaps, Lyapunov
//!   functional, semigroup decay curves and power-law fits.
//! * [`timestep`]: exponential time differencing with exact linear propagators.
//! * [`experiments`]: configuration-driven runs and reports.

// `!(x > 0.0)` style checks are kept on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod error;
pub mod velocity;
pub mod spectral;
pub mod linalg;
pub mod state;
pub mod dynamics;
pub mod linear;
pub mod timestep;
pub mod experiments;

pub use error::{Error, Result};
pub use num_complex::Complex64;
