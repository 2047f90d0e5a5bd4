//! Initial-data generators.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralField, Transformer};
use crate::state::{conserved_quantities, SystemState};
use crate::velocity::Truncation;

/// Which component of the mode vector a probe excites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    /// Hermite coefficient at this position of the truncation.
    Hermite(usize),
    Density,
    Velocity(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialData {
    /// Random smooth band-limited data with zero conserved integrals.
    TorusRandom,
    /// Gaussian bumps of width `L / 32` at the box center in `a`, `rho`, `u_1`.
    BoxBump,
    /// `epsilon cos(k . x)` in one slot at lattice index `mode`.
    ModeProbe { mode: [i64; 3], slot: Slot },
}

/// `sqrt(sum over components of ||.||_{H^2}^2)`.
pub fn h2_norm(state: &SystemState) -> f64 {
    state.components().map(|c| c.sobolev_norm_sq(2)).sum::<f64>().sqrt()
}

pub fn generate_initial_data(
    kind: InitialData,
    seed: u64,
    epsilon: f64,
    grid: Grid,
    trunc: &Arc<Truncation>,
) -> Result<SystemState> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("amplitude must be positive, got {epsilon}")));
    }
    match kind {
        InitialData::TorusRandom => torus_random(seed, epsilon, grid, trunc),
        InitialData::BoxBump => box_bump(epsilon, grid, trunc),
        InitialData::ModeProbe { mode, slot } => mode_probe(mode, slot, epsilon, grid, trunc),
    }
}

fn random_field(rng: &mut ChaCha8Rng, grid: Grid) -> SpectralField {
    let limit = (grid.points_per_axis() / 4) as f64;
    let mut f = SpectralField::zeros(grid);
    for (i, z) in f.coeffs_mut().iter_mut().enumerate() {
        let m = grid.mode_index(i);
        let m2: f64 = m[..grid.dim()].iter().map(|&x| (x * x) as f64).sum();
        // Draw for every mode so the stream does not depend on the band.
        let re: f64 = rng.random_range(-1.0..1.0);
        let im: f64 = rng.random_range(-1.0..1.0);
        if m2.sqrt() <= limit {
            *z = Complex64::new(re, im) / (1.0 + m2);
        }
    }
    f.symmetrize();
    f.truncate_band();
    f
}

fn torus_random(seed: u64, epsilon: f64, grid: Grid, trunc: &Arc<Truncation>) -> Result<SystemState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = SystemState::zeros(grid, trunc)?;
    for c in state.components_mut() {
        *c = random_field(&mut rng, grid);
    }
    let norm = h2_norm(&state);
    state = state.scaled(epsilon / norm);
    let zero = Complex64::new(0.0, 0.0);
    state.f[0].coeffs_mut()[0] = zero;
    state.rho.coeffs_mut()[0] = zero;
    let tr = Transformer::new(grid);
    for axis in 0..grid.dim() {
        state.f[1 + axis].coeffs_mut()[0] = zero;
    }
    let cons = conserved_quantities(&state, &tr)?;
    let mf = grid.mean_factor();
    for axis in 0..grid.dim() {
        state.f[1 + axis].coeffs_mut()[0] = Complex64::new(-cons.momentum[axis] / mf, 0.0);
    }
    let check = conserved_quantities(&state, &tr)?;
    let scale = grid.volume() * epsilon;
    if check.max_abs() > 1e-12 * scale.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "constraint projection left conserved integrals at {:e}",
            check.max_abs()
        )));
    }
    Ok(state)
}

fn box_bump(epsilon: f64, grid: Grid, trunc: &Arc<Truncation>) -> Result<SystemState> {
    let width = grid.box_length() / 32.0;
    let center = grid.box_length() / 2.0;
    let samples: Vec<f64> = (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            let r2: f64 = x[..grid.dim()].iter().map(|xi| (xi - center).powi(2)).sum();
            epsilon * (-0.5 * r2 / (width * width)).exp()
        })
        .collect();
    let tr = Transformer::new(grid);
    let mut bump = tr.transform(&samples)?;
    bump.truncate_band();
    bump.symmetrize();
    let mut state = SystemState::zeros(grid, trunc)?;
    state.f[0] = bump.clone();
    state.rho = bump.clone();
    state.vel[0] = bump;
    Ok(state)
}

fn mode_probe(mode: [i64; 3], slot: Slot, epsilon: f64, grid: Grid, trunc: &Arc<Truncation>) -> Result<SystemState> {
    let d = grid.dim();
    let flat = grid.flat_index(&mode[..d]);
    if !grid.in_band(flat) {
        return Err(Error::InvalidArgument(format!("probe mode {mode:?} lies outside the 2/3 band")));
    }
    let mut state = SystemState::zeros(grid, trunc)?;
    let field = match slot {
        Slot::Hermite(p) if p < trunc.len() => &mut state.f[p],
        Slot::Density => &mut state.rho,
        Slot::Velocity(i) if i < d => &mut state.vel[i],
        _ => return Err(Error::InvalidArgument(format!("probe slot {slot:?} does not exist"))),
    };
    // epsilon cos(k.x) has coefficients epsilon n^d / 2 at +-k.
    let amp = epsilon * grid.len() as f64 / 2.0;
    let neg = grid.negated(flat);
    field.coeffs_mut()[flat] += Complex64::new(amp, 0.0);
    field.coeffs_mut()[neg] += Complex64::new(amp, 0.0);
    Ok(state)
}
