use std::f64::consts::PI;
use std::sync::Arc;

use kinetic_fluid::linalg::{max_abs_diff, phi_functions, CMatrix};
use kinetic_fluid::linear::build_mode_matrix;
use kinetic_fluid::spectral::Grid;
use kinetic_fluid::state::{DiagnosticsContext, EnergyWeights, ModelParams, SystemState};
use kinetic_fluid::timestep::{integrate, integrate_with_diagnostics, precompute_propagators, step_count, Integrator};
use kinetic_fluid::velocity::{enumerate_truncation, Truncation};
use kinetic_fluid::Complex64;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_state(grid: Grid, trunc: &Arc<Truncation>, seed: u64, amplitude: f64) -> SystemState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = SystemState::zeros(grid, trunc).unwrap();
    let d = grid.dim();
    for c in s.components_mut() {
        for (i, z) in c.coeffs_mut().iter_mut().enumerate() {
            let m = grid.mode_index(i);
            if m[..d].iter().all(|x| x.abs() <= 2) {
                *z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * amplitude;
            }
        }
    }
    s.symmetrize();
    s.truncate_band();
    s
}

#[test]
fn symmetry_reduced_table_matches_direct_exponentials() {
    let grid = Grid::new(3, 8, 5.0).unwrap();
    let trunc = enumerate_truncation(3, 3).unwrap();
    let p = ModelParams::default();
    let dt = 0.05;
    let table = precompute_propagators(grid, &trunc, &p, dt).unwrap();
    assert!(table.canonical_len() < grid.len() / 4);
    for flat in [0, 1, 7, 9, 63, 100, 150, 300, 448, 511] {
        let Some(mp) = table.mode_matrices(flat) else { continue };
        let b = build_mode_matrix(&grid.wavevector(flat), &trunc, &p);
        let (e, p1, p2) = phi_functions(&b.matrix, dt);
        assert!(max_abs_diff(&mp.exp, &e) < 1e-12, "mode {flat}");
        assert!(max_abs_diff(&mp.phi1, &p1) < 1e-12, "mode {flat}");
        assert!(max_abs_diff(&mp.phi2, &p2) < 1e-12, "mode {flat}");
        assert!(max_abs_diff(&mp.exp, &b.propagator(dt)) < 1e-12, "mode {flat}");
    }
}

#[test]
fn phi_functions_of_a_scalar() {
    for z in [-3.0, -1e-4, 0.0, 1e-6, 2.0] {
        let a = CMatrix::from_element(1, 1, Complex64::new(z, 0.0));
        let (e, p1, p2) = phi_functions(&a, 1.0);
        let (want1, want2) = if z == 0.0 {
            (1.0, 0.5)
        } else if z.abs() < 1e-3 {
            (1.0 + z / 2.0 + z * z / 6.0, 0.5 + z / 6.0 + z * z / 24.0)
        } else {
            ((z.exp() - 1.0) / z, (z.exp() - 1.0 - z) / (z * z))
        };
        assert!((e[(0, 0)].re - z.exp()).abs() < 1e-14);
        assert!((p1[(0, 0)].re - want1).abs() < 1e-13, "z = {z}");
        assert!((p2[(0, 0)].re - want2).abs() < 1e-13, "z = {z}");
    }
}

#[test]
fn tiny_step_propagator_is_identity() {
    let trunc = enumerate_truncation(3, 4).unwrap();
    let b = build_mode_matrix(&[0.5, 1.0, -2.0], &trunc, &ModelParams::default());
    let e = b.propagator(1e-8);
    assert!(max_abs_diff(&e, &CMatrix::identity(b.size(), b.size())) < 1e-6);
}

#[test]
fn zero_mode_conserved_directions_are_fixed() {
    let trunc = enumerate_truncation(3, 4).unwrap();
    let b = build_mode_matrix(&[0.0; 3], &trunc, &ModelParams::default());
    let e = b.propagator(0.7);
    let na = trunc.len();
    let n = b.size();
    let mut kernel = Vec::new();
    for slot in [0, na] {
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        v[slot] = Complex64::new(1.0, 0.0);
        kernel.push(v);
    }
    for i in 0..3 {
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        v[1 + i] = Complex64::new(1.0, 0.0);
        v[na + 1 + i] = Complex64::new(1.0, 0.0);
        kernel.push(v);
    }
    for v in kernel {
        let x = DVector::from_vec(v);
        assert!((&e * &x - &x).norm() < 1e-12);
    }
}

#[test]
fn semigroup_property() {
    let trunc = enumerate_truncation(3, 4).unwrap();
    let b = build_mode_matrix(&[0.3, -1.2, 0.8], &trunc, &ModelParams::default());
    let e = b.propagator(0.05);
    assert!(max_abs_diff(&b.propagator(0.1), &(&e * &e)) < 1e-10);
}

#[test]
fn linear_run_matches_modewise_exponential() {
    let grid = Grid::new(3, 8, 2.0 * PI).unwrap();
    let trunc = enumerate_truncation(3, 3).unwrap();
    let p = ModelParams::default();
    let dt = 0.01;
    let integ = Integrator::new(grid, &trunc, &p, dt, false).unwrap();
    let s0 = random_state(grid, &trunc, 1, 1.0);
    let mut s = s0.clone();
    for _ in 0..100 {
        s = integ.step(&s).unwrap();
    }
    let mut worst = 0.0f64;
    let mut size = 0.0f64;
    for flat in 0..grid.len() {
        let x = s0.mode_vector(flat);
        if x.iter().all(|z| z.norm() == 0.0) {
            continue;
        }
        let b = build_mode_matrix(&grid.wavevector(flat), &trunc, &p);
        let y = b.propagator(1.0) * DVector::from_vec(x);
        for (a, r) in s.mode_vector(flat).iter().zip(y.iter()) {
            worst = worst.max((a - r).norm());
            size = size.max(r.norm());
        }
    }
    assert!(worst <= 1e-10 * size, "deviation {worst:e}");
    assert!((s.time - 1.0).abs() < 1e-12);
}

#[test]
fn equilibrium_is_a_fixed_point() {
    let grid = Grid::new(2, 8, 4.0).unwrap();
    let trunc = enumerate_truncation(2, 3).unwrap();
    let integ = Integrator::new(grid, &trunc, &ModelParams::default(), 0.05, true).unwrap();
    let zero = SystemState::zeros(grid, &trunc).unwrap();
    let mut s = zero.clone();
    for _ in 0..5 {
        s = integ.step(&s).unwrap();
    }
    assert!(s.components().all(|c| c.coeffs().iter().all(|z| z.re == 0.0 && z.im == 0.0)));
}

#[test]
fn second_order_convergence() {
    let grid = Grid::new(2, 8, 2.0 * PI).unwrap();
    let trunc = enumerate_truncation(2, 2).unwrap();
    let p = ModelParams::default();
    let s0 = random_state(grid, &trunc, 4, 0.1 * grid.len() as f64 / 25.0);
    let t_end = 0.4;
    let run = |dt: f64| {
        let integ = Integrator::new(grid, &trunc, &p, dt, true).unwrap();
        let (_, last, _, abort) = integrate(&s0, t_end, &integ, 1000, |_| Ok(()));
        assert!(abort.is_none());
        last
    };
    let reference = run(0.0025);
    let errs: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|&dt| run(dt).max_abs_diff(&reference)).collect();
    let order1 = (errs[0] / errs[1]).log2();
    let order2 = (errs[1] / errs[2]).log2();
    assert!(order1 >= 1.8 && order2 >= 1.8, "observed orders {order1}, {order2} from {errs:?}");
}

#[test]
fn integrate_edge_cases() {
    let grid = Grid::new(3, 8, 2.0 * PI).unwrap();
    let trunc = enumerate_truncation(3, 2).unwrap();
    let p = ModelParams::default();
    let integ = Integrator::new(grid, &trunc, &p, 0.1, true).unwrap();
    let ctx = DiagnosticsContext::new(grid, &trunc, p, EnergyWeights::default(), 1.0);
    let mut zero = SystemState::zeros(grid, &trunc).unwrap();
    zero.time = 2.0;
    assert_eq!(step_count(2.0, 2.0, 0.1), 0);
    assert_eq!(step_count(0.0, 1.0, 0.1), 10);
    let out = integrate_with_diagnostics(&zero, 2.0, &integ, 1, &ctx);
    assert_eq!(out.records.len(), 1);
    assert_eq!(out.steps, 0);
    let out = integrate_with_diagnostics(&zero, 2.5, &integ, 2, &ctx);
    assert!(out.abort.is_none());
    assert_eq!(out.records.len(), 4);
    for r in &out.records {
        assert_eq!((r.zq2, r.energy, r.dissipation, r.energy1, r.dissipation1), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!((r.h2_f, r.h2_rho, r.h2_u), (0.0, 0.0, 0.0));
        assert_eq!((r.mass_p, r.mass_f, r.mom_x, r.mom_y, r.mom_z), (0.0, 0.0, 0.0, 0.0, 0.0));
    }
    let other = SystemState::zeros(Grid::new(3, 8, 3.0).unwrap(), &trunc).unwrap();
    assert!(integ.step(&other).is_err());
}

#[test]
fn vacuum_aborts_with_partial_records() {
    let grid = Grid::new(1, 8, 2.0 * PI).unwrap();
    let trunc = enumerate_truncation(1, 2).unwrap();
    let p = ModelParams::default();
    let integ = Integrator::new(grid, &trunc, &p, 0.1, true).unwrap();
    let mut s = SystemState::zeros(grid, &trunc).unwrap();
    s.rho = kinetic_fluid::spectral::SpectralField::plane_wave(grid, &[1], 1.5, false);
    let ctx = DiagnosticsContext::new(grid, &trunc, p, EnergyWeights::default(), 1.0);
    let out = integrate_with_diagnostics(&s, 1.0, &integ, 1, &ctx);
    assert!(out.abort.is_some());
    assert_eq!(out.records.len(), 1);
    assert_eq!(out.steps, 0);
}
