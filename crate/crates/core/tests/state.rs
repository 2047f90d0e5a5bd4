use std::f64::consts::PI;
use std::sync::Arc;

use approx::assert_abs_diff_eq;
use kinetic_fluid::spectral::{Grid, SpectralField, Transformer};
use kinetic_fluid::state::{
    conserved_quantities, first_order_functionals, mixed_norm_hxv_sq, positivity_min, second_order_functionals,
    zq_norm, DiagnosticsContext, DiagnosticsRecord, EnergyWeights, ModelParams, SystemState,
};
use kinetic_fluid::velocity::{enumerate_truncation, QuadratureRule, Truncation};
use kinetic_fluid::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_state(grid: Grid, trunc: &Arc<Truncation>, seed: u64, amplitude: f64) -> SystemState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = SystemState::zeros(grid, trunc).unwrap();
    for c in s.components_mut() {
        for z in c.coeffs_mut() {
            *z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * amplitude;
        }
    }
    s.symmetrize();
    s.truncate_band();
    s
}

/// Sum of squared coefficient-space norms: `||f||^2_{L^2_v(H^2)} + ||(rho, u)||^2_{H^2}`.
fn reference_norm_sq(s: &SystemState) -> f64 {
    s.components().map(|c| c.sobolev_norm_sq(2)).sum()
}

#[test]
fn mixed_norm_of_e0_sine() {
    let grid = Grid::new(1, 16, 2.0 * PI).unwrap();
    let trunc = enumerate_truncation(1, 4).unwrap();
    let mut s = SystemState::zeros(grid, &trunc).unwrap();
    s.f[0] = SpectralField::plane_wave(grid, &[1], 1.0, true);
    assert_abs_diff_eq!(mixed_norm_hxv_sq(&s, 0).unwrap(), PI, epsilon = 1e-12);
    assert_abs_diff_eq!(mixed_norm_hxv_sq(&s, 1).unwrap(), 9.0 * PI / 4.0, epsilon = 1e-12);
    assert_eq!(mixed_norm_hxv_sq(&SystemState::zeros(grid, &trunc).unwrap(), 2).unwrap(), 0.0);
    assert!(mixed_norm_hxv_sq(&s, 3).is_err());
}

#[test]
fn mixed_norm_monotone_in_order() {
    let grid = Grid::new(2, 8, 5.0).unwrap();
    let trunc = enumerate_truncation(2, 3).unwrap();
    let s = random_state(grid, &trunc, 4, 1.0);
    let n: Vec<f64> = (0..=2).map(|k| mixed_norm_hxv_sq(&s, k).unwrap()).collect();
    assert!(n[0] <= n[1] && n[1] <= n[2]);
}

#[test]
fn zq_two_equals_coefficient_norm_and_separable_case() {
    let grid = Grid::new(2, 8, 4.0).unwrap();
    let trunc = enumerate_truncation(2, 3).unwrap();
    let tr = Transformer::new(grid);
    let s = random_state(grid, &trunc, 9, 1.0);
    let coeff: f64 = s.f.iter().map(|c| c.l2_norm_sq()).sum();
    assert_abs_diff_eq!(zq_norm(&s, 2.0, &tr).unwrap(), coeff.sqrt(), epsilon = 1e-10);
    assert_abs_diff_eq!(
        zq_norm(&s.scaled(-3.0), 1.5, &tr).unwrap(),
        3.0 * zq_norm(&s, 1.5, &tr).unwrap(),
        epsilon = 1e-12
    );
    let mut sep = SystemState::zeros(grid, &trunc).unwrap();
    sep.f[0] = s.rho.clone();
    for q in [1.0, 1.5, 2.0] {
        let lq = tr.lebesgue_norm(&sep.f[0], q).unwrap();
        assert_abs_diff_eq!(zq_norm(&sep, q, &tr).unwrap(), lq, epsilon = 1e-10 * lq.max(1.0));
    }
    assert!(zq_norm(&s, 0.5, &tr).is_err());
}

#[test]
fn zero_state_functionals_vanish() {
    let grid = Grid::new(3, 8, 2.0 * PI).unwrap();
    let trunc = enumerate_truncation(3, 2).unwrap();
    let s = SystemState::zeros(grid, &trunc).unwrap();
    let p = ModelParams::default();
    let w = EnergyWeights::default();
    let f = first_order_functionals(&s, &p, &w);
    let g = second_order_functionals(&s, &p, &w, 1.0);
    assert_eq!((f.energy, f.dissipation, f.e0), (0.0, 0.0, 0.0));
    assert_eq!((g.energy, g.dissipation, g.e0_high), (0.0, 0.0, 0.0));
}

#[test]
fn pure_macro_density_mode() {
    let grid = Grid::new(3, 8, 2.0 * PI).unwrap();
    let trunc = enumerate_truncation(3, 2).unwrap();
    let mut s = SystemState::zeros(grid, &trunc).unwrap();
    s.f[0] = SpectralField::plane_wave(grid, &[1, 0, 0], 0.1, false);
    let f = first_order_functionals(&s, &ModelParams::default(), &EnergyWeights::default());
    assert_eq!(f.e0, 0.0);
    // D = ||nabla a||^2_{H^1} only: |k|^2 (1 + |k|^2) ||a||^2 with |k| = 1.
    assert_abs_diff_eq!(f.dissipation, 2.0 * s.f[0].l2_norm_sq(), epsilon = 1e-14);
}

#[test]
fn energy_equivalence_on_random_small_states() {
    let grid = Grid::new(3, 8, 2.0 * PI).unwrap();
    let trunc = enumerate_truncation(3, 3).unwrap();
    let p = ModelParams::default();
    let w = EnergyWeights::default();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let (mut lo1, mut hi1) = (f64::INFINITY, 0.0f64);
    for seed in 0..200 {
        let s = random_state(grid, &trunc, seed, 1e-3);
        let r = reference_norm_sq(&s);
        let e = first_order_functionals(&s, &p, &w).energy / r;
        lo = lo.min(e);
        hi = hi.max(e);
        let grad2: f64 = s.components().map(|c| c.weighted_norm_sq(|i| grid.k_norm_sq(i).powi(2))).sum();
        let e1 = second_order_functionals(&s, &p, &w, 1.0).energy / grad2;
        lo1 = lo1.min(e1);
        hi1 = hi1.max(e1);
    }
    assert!(lo >= 0.5 && hi <= 2.0, "E ratio in [{lo}, {hi}]");
    assert!(lo1 >= 0.5 && hi1 <= 2.0, "E1 ratio in [{lo1}, {hi1}]");
}

#[test]
fn dissipations_nonnegative() {
    let grid = Grid::new(2, 8, 3.0).unwrap();
    let trunc = enumerate_truncation(2, 4).unwrap();
    let p = ModelParams::default();
    let w = EnergyWeights::default();
    for seed in 0..20 {
        let s = random_state(grid, &trunc, seed, 1.0);
        assert!(first_order_functionals(&s, &p, &w).dissipation >= 0.0);
        assert!(second_order_functionals(&s, &p, &w, 2.0).dissipation >= 0.0);
    }
}

#[test]
fn low_frequency_state_has_no_high_macro_dissipation() {
    let grid = Grid::new(3, 8, 16.0 * PI).unwrap();
    let trunc = enumerate_truncation(3, 2).unwrap();
    let mut s = SystemState::zeros(grid, &trunc).unwrap();
    // |k| = 1/8 <= r0 / 2
    s.f[0] = SpectralField::plane_wave(grid, &[1, 0, 0], 0.1, false);
    s.rho = SpectralField::plane_wave(grid, &[0, 1, 0], 0.1, false);
    let g = second_order_functionals(&s, &ModelParams::default(), &EnergyWeights::default(), 1.0);
    assert_eq!(g.e0_high, 0.0);
    // the high macro parts vanish and b = u = 0, {I - P} f = 0
    assert_eq!(g.dissipation, 0.0);
}

#[test]
fn conserved_quantities_examples() {
    let grid = Grid::new(3, 8, 3.0).unwrap();
    let trunc = enumerate_truncation(3, 2).unwrap();
    let tr = Transformer::new(grid);
    let zero = SystemState::zeros(grid, &trunc).unwrap();
    assert_eq!(conserved_quantities(&zero, &tr).unwrap().max_abs(), 0.0);
    let mut s = zero.clone();
    let c = [0.3, -0.2, 0.5];
    for (i, ci) in c.iter().enumerate() {
        s.vel[i] = SpectralField::constant(grid, *ci);
    }
    let q = conserved_quantities(&s, &tr).unwrap();
    for (i, ci) in c.iter().enumerate() {
        assert_abs_diff_eq!(q.momentum[i], ci * 27.0, epsilon = 1e-12);
    }
}

#[test]
fn positivity_examples() {
    let grid = Grid::new(1, 8, 2.0 * PI).unwrap();
    let trunc = enumerate_truncation(1, 4).unwrap();
    let tr = Transformer::new(grid);
    let probe = QuadratureRule::new(1, 6).unwrap();
    let zero = SystemState::zeros(grid, &trunc).unwrap();
    let vmax = probe.nodes().iter().map(|v| v[0].abs()).fold(0.0, f64::max);
    let m = (-0.5 * vmax * vmax).exp() / (2.0 * PI).sqrt();
    assert_abs_diff_eq!(positivity_min(&zero, &probe, &tr).unwrap(), m, epsilon = 1e-15);
    let mut neg = zero.clone();
    neg.f[0] = SpectralField::constant(grid, -2.0);
    assert!(positivity_min(&neg, &probe, &tr).unwrap() < 0.0);
    let small = random_state(grid, &trunc, 1, 1e-3 / 8.0);
    assert!(positivity_min(&small, &probe, &tr).unwrap() > 0.0);
}

#[test]
fn diagnostics_record_columns_and_json() {
    let grid = Grid::new(3, 8, 2.0 * PI).unwrap();
    let trunc = enumerate_truncation(3, 2).unwrap();
    let s = random_state(grid, &trunc, 2, 1e-3);
    let ctx = DiagnosticsContext::new(grid, &trunc, ModelParams::default(), EnergyWeights::default(), 1.0);
    let r = ctx.record(&s).unwrap();
    let v = r.values();
    assert_eq!(v.len(), DiagnosticsRecord::COLUMNS.len());
    let json = serde_json::to_value(&r).unwrap();
    let keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, DiagnosticsRecord::COLUMNS.to_vec());
    for (name, x) in DiagnosticsRecord::COLUMNS.iter().zip(v) {
        assert_eq!(json[*name].as_f64().unwrap(), x);
    }
    for x in [r.zq2, r.h2_f, r.h2_rho, r.h2_u, r.dissipation, r.dissipation1, r.grad_f, r.grad_rho, r.grad_u] {
        assert!(x >= 0.0);
    }
}

#[test]
fn weights_validation() {
    let mut w = EnergyWeights::default();
    assert!(w.validate().is_ok());
    w.tau[2] = w.tau[0];
    assert!(w.validate().is_err());
    assert!(ModelParams::new(1.0, 1.0, 1.0).is_err());
    assert!(ModelParams::new(0.0, 1.4, 1.0).is_err());
}
