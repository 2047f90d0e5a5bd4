use std::f64::consts::PI;
use std::sync::Arc;

use approx::assert_abs_diff_eq;
use kinetic_fluid::dynamics::{
    full_rhs, kinetic_nonlinear_macro_micro, linear_rhs, nonlinear_rhs, pressure_coefficient,
};
use kinetic_fluid::linear::build_mode_matrix;
use kinetic_fluid::spectral::{Grid, SpectralField, Transformer};
use kinetic_fluid::state::{ModelParams, SystemState};
use kinetic_fluid::velocity::{
    enumerate_truncation, maxwellian, PointwiseOracle, QuadratureRule, Truncation, VelocityCoeffs,
};
use kinetic_fluid::{Complex64, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random real state with lattice content `|m_i| <= max_mode` and total
/// Hermite degree `<= max_degree`.
fn random_state(
    grid: Grid,
    trunc: &Arc<Truncation>,
    seed: u64,
    amplitude: f64,
    max_mode: i64,
    max_degree: usize,
) -> SystemState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = SystemState::zeros(grid, trunc).unwrap();
    let degrees: Vec<usize> = trunc.indices().iter().map(|m| m.degree()).collect();
    let d = grid.dim();
    for (slot, c) in s.components_mut().enumerate() {
        let keep = slot >= degrees.len() || degrees[slot] <= max_degree;
        for (i, z) in c.coeffs_mut().iter_mut().enumerate() {
            let m = grid.mode_index(i);
            let inside = m[..d].iter().all(|x| x.abs() <= max_mode);
            let v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            *z = if keep && inside { v * amplitude * grid.len() as f64 } else { Complex64::new(0.0, 0.0) };
        }
    }
    s.symmetrize();
    s.truncate_band();
    s
}

fn params() -> ModelParams {
    ModelParams::new(0.7, 1.4, 1.3).unwrap()
}

#[test]
fn mode_matrix_matches_linear_rhs() {
    let grid = Grid::new(3, 8, 5.0).unwrap();
    let trunc = enumerate_truncation(3, 3).unwrap();
    let s = random_state(grid, &trunc, 1, 1.0, 2, 3);
    let r = linear_rhs(&s, &params());
    for mode in [0, 1, 9, 73, 200] {
        let k = grid.wavevector(mode);
        let m = build_mode_matrix(&k, &trunc, &params());
        let y = m.apply(&s.mode_vector(mode));
        for (a, b) in y.iter().zip(r.mode_vector(mode)) {
            assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()));
        }
    }
}

#[test]
fn linear_rhs_single_velocity_mode() {
    let grid = Grid::new(3, 8, 2.0 * PI).unwrap();
    let trunc = enumerate_truncation(3, 2).unwrap();
    let p = params();
    let mut s = SystemState::zeros(grid, &trunc).unwrap();
    s.vel[1] = SpectralField::plane_wave(grid, &[1, 2, 0], 1.0, false);
    let r = linear_rhs(&s, &p);
    let k2 = 5.0;
    assert!(r.vel[1].max_abs_diff(&s.vel[1].scale(-p.mu * k2 - 1.0)) < 1e-12);
    assert!(r.f[2].max_abs_diff(&s.vel[1]) < 1e-12);
    assert!(r.rho.max_abs_diff(&s.vel[1].derivative(1).scale(-1.0)) < 1e-12);
}

#[test]
fn zero_mode_drag_exchange() {
    let grid = Grid::new(1, 8, 2.0 * PI).unwrap();
    let trunc = enumerate_truncation(1, 2).unwrap();
    let mut s = SystemState::zeros(grid, &trunc).unwrap();
    s.f[1] = SpectralField::constant(grid, 0.3);
    s.vel[0] = SpectralField::constant(grid, -0.1);
    let r = linear_rhs(&s, &params());
    let db = r.f[1].coeffs()[0].re / grid.len() as f64;
    let du = r.vel[0].coeffs()[0].re / grid.len() as f64;
    assert_abs_diff_eq!(db, -0.3 - 0.1, epsilon = 1e-14);
    assert_abs_diff_eq!(du, 0.3 + 0.1, epsilon = 1e-14);
    assert_abs_diff_eq!(db + du, 0.0, epsilon = 1e-14);
}

#[test]
fn pressure_coefficient_examples() {
    let p = ModelParams::default();
    for q in pressure_coefficient(&[0.0; 4], &p).unwrap() {
        assert_abs_diff_eq!(q, 1.4, epsilon = 1e-15);
    }
    let q = pressure_coefficient(&[0.1], &p).unwrap()[0];
    assert_abs_diff_eq!(q, 1.4 * 1.1f64.powf(-0.6), epsilon = 1e-15);
    let p2 = ModelParams::new(1.0, 2.0, 1.5).unwrap();
    for q in pressure_coefficient(&[-0.5, 0.0, 3.0], &p2).unwrap() {
        assert_abs_diff_eq!(q, 3.0, epsilon = 1e-15);
    }
    match pressure_coefficient(&[0.0, -1.0], &p) {
        Err(Error::NonpositiveDensity { index, .. }) => assert_eq!(index, 1),
        other => panic!("expected a density error, got {other:?}"),
    }
}

#[test]
fn nonlinear_zero_cases() {
    let grid = Grid::new(2, 8, 4.0).unwrap();
    let trunc = enumerate_truncation(2, 3).unwrap();
    let tr = Transformer::new(grid);
    let zero = SystemState::zeros(grid, &trunc).unwrap();
    assert_eq!(nonlinear_rhs(&zero, &params(), &tr).unwrap().l2_norm_sq(), 0.0);
    assert_eq!(full_rhs(&zero, &params(), &tr).unwrap().l2_norm_sq(), 0.0);
    let mut only_rho = zero.clone();
    only_rho.rho = random_state(grid, &trunc, 2, 0.05, 2, 3).rho;
    // only the pressure force survives
    let r = nonlinear_rhs(&only_rho, &params(), &tr).unwrap();
    assert!(r.f.iter().all(|c| c.l2_norm_sq() == 0.0));
    assert_eq!(r.rho.l2_norm_sq(), 0.0);
    assert!(r.vel[0].l2_norm_sq() > 0.0);
}

#[test]
fn nonlinear_without_density_perturbation() {
    let grid = Grid::new(2, 16, 4.0).unwrap();
    let trunc = enumerate_truncation(2, 3).unwrap();
    let tr = Transformer::new(grid);
    let mut s = random_state(grid, &trunc, 3, 0.05, 2, 2);
    s.rho = SpectralField::zeros(grid);
    let r = nonlinear_rhs(&s, &params(), &tr).unwrap();
    // fluid: -u . grad u - a u
    for i in 0..2 {
        let mut expected = tr.dealiased_product(&s.f[0], &s.vel[i]).unwrap().scale(-1.0);
        for j in 0..2 {
            expected = expected.sub(&tr.dealiased_product(&s.vel[j], &s.vel[i].derivative(j)).unwrap());
        }
        assert!(r.vel[i].max_abs_diff(&expected) < 1e-10 * grid.len() as f64);
    }
    assert_eq!(r.rho.l2_norm_sq(), 0.0);
}

#[test]
fn both_kinetic_assemblies_agree() {
    let grid = Grid::new(3, 8, 5.0).unwrap();
    let trunc = enumerate_truncation(3, 3).unwrap();
    let tr = Transformer::new(grid);
    for seed in 0..3 {
        let s = random_state(grid, &trunc, seed, 0.005, 4, 3);
        let a = nonlinear_rhs(&s, &params(), &tr).unwrap();
        let b = kinetic_nonlinear_macro_micro(&s, &tr).unwrap();
        let scale = grid.len() as f64;
        for (x, y) in a.f.iter().zip(&b) {
            assert!(x.max_abs_diff(y) < 1e-10 * scale);
        }
    }
}

#[test]
fn split_identity() {
    let grid = Grid::new(2, 8, 5.0).unwrap();
    let trunc = enumerate_truncation(2, 3).unwrap();
    let tr = Transformer::new(grid);
    let p = params();
    for seed in 0..100 {
        let s = random_state(grid, &trunc, seed, 0.02, 4, 3);
        let mut sum = nonlinear_rhs(&s, &p, &tr).unwrap();
        sum.axpy(1.0, &linear_rhs(&s, &p));
        assert!(full_rhs(&s, &p, &tr).unwrap().max_abs_diff(&sum) <= 1e-12 * grid.len() as f64);
    }
}

/// `(I-3)-(I-5)` assembled pointwise in `(x, v)` with the quadrature oracle,
/// without the linear/nonlinear split.
fn direct_rhs(s: &SystemState, p: &ModelParams, tr: &Transformer) -> SystemState {
    let grid = *s.grid();
    let trunc = s.trunc().clone();
    let d = grid.dim();
    let oracle = PointwiseOracle::new(QuadratureRule::for_truncation(&trunc), &trunc).unwrap();
    let phys = |f: &SpectralField| tr.inverse_transform(f).unwrap();
    let c: Vec<Vec<f64>> = s.f.iter().map(phys).collect();
    let dc: Vec<Vec<Vec<f64>>> = (0..d).map(|j| s.f.iter().map(|f| phys(&f.derivative(j))).collect()).collect();
    let rho = phys(&s.rho);
    let u: Vec<Vec<f64>> = s.vel.iter().map(phys).collect();
    let grad_rho: Vec<Vec<f64>> = (0..d).map(|j| phys(&s.rho.derivative(j))).collect();
    let grad_u: Vec<Vec<Vec<f64>>> = (0..d).map(|i| (0..d).map(|j| phys(&s.vel[i].derivative(j))).collect()).collect();
    let lap_u: Vec<Vec<f64>> = s.vel.iter().map(|f| phys(&f.laplacian())).collect();
    let rho_u: Vec<Vec<f64>> = u.iter().map(|ui| ui.iter().zip(&rho).map(|(a, b)| a * (1.0 + b)).collect()).collect();
    let div_rho_u: Vec<f64> = {
        let mut acc = vec![0.0; grid.len()];
        for (j, ru) in rho_u.iter().enumerate() {
            let f = tr.transform(ru).unwrap().derivative(j);
            for (a, b) in acc.iter_mut().zip(phys(&f)) {
                *a += b;
            }
        }
        acc
    };
    let nodes = oracle.rule().nodes();
    let mut kin = vec![vec![0.0; grid.len()]; trunc.len()];
    let mut fluid_u = vec![vec![0.0; grid.len()]; d];
    let mut fluid_rho = vec![0.0; grid.len()];
    for x in 0..grid.len() {
        let at = |v: &Vec<Vec<f64>>| {
            VelocityCoeffs::from_real(&trunc, &v.iter().map(|f| f[x]).collect::<Vec<_>>()).unwrap()
        };
        let f = oracle.sample(&at(&c));
        let df: Vec<_> = (0..d).map(|j| oracle.evaluate(&at(&dc[j]))).collect();
        let n = 1.0 + rho[x];
        let vals: Vec<Complex64> = nodes
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let v = &v[..d];
                let r2: f64 = v.iter().map(|a| a * a).sum();
                let sqrt_m = maxwellian(v).sqrt();
                let lf = f.laplacian[i] - f.f[i] * (0.25 * r2) + f.f[i] * (0.5 * d as f64);
                let mut out = lf * n;
                for j in 0..d {
                    let uj = u[j][x];
                    out -= df[j][i] * v[j];
                    out += n * uj * (v[j] * sqrt_m - f.grad[i][j] + 0.5 * v[j] * f.f[i]);
                }
                out
            })
            .collect();
        let proj = oracle.project(&vals, &trunc).unwrap();
        for (row, z) in kin.iter_mut().zip(proj.values()) {
            row[x] = z.re;
        }
        fluid_rho[x] = -div_rho_u[x];
        let g = p.c0 * p.gamma * n.powf(p.gamma - 2.0);
        for i in 0..d {
            let conv: f64 = (0..d).map(|j| u[j][x] * grad_u[i][j][x]).sum();
            fluid_u[i][x] = -conv - g * grad_rho[i][x] + p.mu * lap_u[i][x] / n + c[1 + i][x] - u[i][x]
                - c[0][x] * u[i][x];
        }
    }
    let spec = |v: &[f64]| {
        let mut f = tr.transform(v).unwrap();
        f.truncate_band();
        f
    };
    let mut out = SystemState::zeros(grid, &trunc).unwrap();
    out.f = kin.iter().map(|r| spec(r)).collect();
    out.rho = spec(&fluid_rho);
    out.vel = fluid_u.iter().map(|r| spec(r)).collect();
    out
}

#[test]
fn direct_assembly_cross_check() {
    // Lattice content |m| <= 2 on n = 16 keeps every triple product alias-free,
    // and gamma = 2 makes the pressure quadratic, so the conservation form and
    // the chain rule coincide and both assemblies agree to roundoff.
    let grid = Grid::new(2, 16, 2.0 * PI).unwrap();
    let trunc = enumerate_truncation(2, 3).unwrap();
    let tr = Transformer::new(grid);
    let p = ModelParams::new(0.7, 2.0, 1.3).unwrap();
    for seed in 0..2 {
        let s = random_state(grid, &trunc, seed, 0.01, 2, 3);
        let a = full_rhs(&s, &p, &tr).unwrap();
        let b = direct_rhs(&s, &p, &tr);
        let diff = a.max_abs_diff(&b) / grid.len() as f64;
        assert!(diff < 1e-10, "max deviation {diff:e}");
    }
}

#[test]
fn conservative_pressure_close_to_chain_rule() {
    let grid = Grid::new(2, 16, 2.0 * PI).unwrap();
    let trunc = enumerate_truncation(2, 3).unwrap();
    let tr = Transformer::new(grid);
    let p = params();
    let s = random_state(grid, &trunc, 4, 0.01, 2, 3);
    let a = full_rhs(&s, &p, &tr).unwrap();
    let b = direct_rhs(&s, &p, &tr);
    let diff = a.max_abs_diff(&b) / grid.len() as f64;
    let size = a.max_abs_diff(&SystemState::zeros(grid, &trunc).unwrap()) / grid.len() as f64;
    assert!(diff < 1e-4 * size, "deviation {diff:e} against {size:e}");
}

#[test]
fn moment_system_holds() {
    let grid = Grid::new(3, 8, 5.0).unwrap();
    let trunc = enumerate_truncation(3, 3).unwrap();
    let tr = Transformer::new(grid);
    let p = params();
    let s = random_state(grid, &trunc, 7, 0.02, 4, 2);
    let r = full_rhs(&s, &p, &tr).unwrap();
    let d = 3;
    let a = &s.f[0];
    let mut div_b = SpectralField::zeros(grid);
    for i in 0..d {
        div_b = div_b.add(&s.f[1 + i].derivative(i));
    }
    let scale = grid.len() as f64;
    assert!(r.f[0].max_abs_diff(&div_b.scale(-1.0)) < 1e-10 * scale);
    for i in 0..d {
        let mut expected = a.derivative(i).scale(-1.0);
        for j in 0..d {
            let mut e = vec![0usize; d];
            e[i] += 1;
            e[j] += 1;
            let gamma = s.f[trunc.pos(&e)].scale(if i == j { 2f64.sqrt() } else { 1.0 });
            expected = expected.sub(&gamma.derivative(j));
        }
        let one_rho_u = s.vel[i].add(&tr.dealiased_product(&s.rho, &s.vel[i]).unwrap());
        let one_rho_b = s.f[1 + i].add(&tr.dealiased_product(&s.rho, &s.f[1 + i]).unwrap());
        expected = expected.add(&one_rho_u.sub(&one_rho_b));
        expected = expected.add(&tr.dealiased_product(&one_rho_u, a).unwrap());
        assert!(r.f[1 + i].max_abs_diff(&expected) < 1e-10 * scale);
    }
}

#[test]
fn conservation_at_rhs_level() {
    let grid = Grid::new(3, 8, 5.0).unwrap();
    let trunc = enumerate_truncation(3, 3).unwrap();
    let tr = Transformer::new(grid);
    let p = params();
    for seed in 0..5 {
        let s = random_state(grid, &trunc, seed, 0.02, 4, 3);
        let r = full_rhs(&s, &p, &tr).unwrap();
        let scale = grid.len() as f64 * 0.02;
        assert!(r.f[0].coeffs()[0].norm() < 1e-12 * scale);
        assert!(r.rho.coeffs()[0].norm() < 1e-12 * scale);
        for i in 0..3 {
            let rate = r.f[1 + i].coeffs()[0]
                + r.vel[i].coeffs()[0]
                + tr.dealiased_product(&r.rho, &s.vel[i]).unwrap().coeffs()[0]
                + tr.dealiased_product(&s.rho, &r.vel[i]).unwrap().coeffs()[0];
            assert!(rate.norm() < 1e-12 * scale, "momentum rate {rate}");
        }
    }
}

#[test]
fn linearization_error_is_quadratic() {
    let grid = Grid::new(2, 8, 5.0).unwrap();
    let trunc = enumerate_truncation(2, 3).unwrap();
    let tr = Transformer::new(grid);
    let p = params();
    let u = random_state(grid, &trunc, 5, 1.0, 4, 3);
    let err = |eps: f64| {
        let full = full_rhs(&u.scaled(eps), &p, &tr).unwrap();
        full.max_abs_diff(&linear_rhs(&u, &p).scaled(eps))
    };
    let ratio = err(1e-3) / err(5e-4);
    assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
}

#[test]
fn density_vacuum_is_rejected() {
    let grid = Grid::new(1, 8, 2.0 * PI).unwrap();
    let trunc = enumerate_truncation(1, 2).unwrap();
    let tr = Transformer::new(grid);
    let mut s = SystemState::zeros(grid, &trunc).unwrap();
    s.rho = SpectralField::plane_wave(grid, &[1], 2.0, false);
    assert!(matches!(nonlinear_rhs(&s, &params(), &tr), Err(Error::NonpositiveDensity { .. })));
}
