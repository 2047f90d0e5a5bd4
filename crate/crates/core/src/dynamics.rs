//! Right-hand side of the perturbation system, split into the
//! constant-coefficient linear part and the nonlinear remainder.
//!
//! Linear part, per wavevector `k`:
//!
//! ```text
//! d/dt c   = -i (k . V) c + L c + sum_i u_i e_{e_i}
//! d/dt rho = -i k . u
//! d/dt u   = -i k P'(1) rho - mu |k|^2 u - u + b
//! ```
//!
//! Nonlinear part, in physical space:
//!
//! ```text
//! S_f   = (1 + rho) (-u . grad_v f + u . v f / 2) + rho (L f + u . v sqrt(M))
//! S_rho = -rho div u - grad rho . u
//! S_u   = -u . grad u - grad P(1 + rho) / (1 + rho) + P'(1) grad rho
//!         - mu rho / (1 + rho) lap u - a u
//! ```
//!
//! The pressure force is kept in conservation form: `P(1 + rho)` is sampled,
//! truncated and differentiated spectrally, so `(1 + rho) S_u` contributes
//! nothing to the total momentum. It equals the chain-rule form
//! `P'(1 + rho) / (1 + rho) grad rho` up to aliasing.
//!
//! Every product is formed on the grid from band-limited factors and the
//! result is truncated to the 2/3 band. The triple products `(1 + rho) u c`
//! are nested: `w = u + P(rho u)` is truncated before it multiplies `c`, so
//! the discrete balance laws hold exactly.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{SpectralField, Transformer};
use crate::state::{ModelParams, SystemState};
use crate::velocity::Truncation;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `P(1 + rho) = c0 (1 + rho)^gamma` at each physical sample.
pub fn pressure(rho_physical: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    check_density(rho_physical)?;
    Ok(rho_physical.iter().map(|r| params.c0 * (1.0 + r).powf(params.gamma)).collect())
}

/// `c0 gamma (1 + rho)^(gamma - 2)` at each physical sample.
pub fn pressure_coefficient(rho_physical: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    check_density(rho_physical)?;
    let e = params.gamma - 2.0;
    Ok(rho_physical
        .iter()
        .map(|r| params.c0 * params.gamma * (1.0 + r).powf(e))
        .collect())
}

fn check_density(rho_physical: &[f64]) -> Result<()> {
    let (index, min) = rho_physical
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, r)| if 1.0 + r < acc.1 { (i, 1.0 + r) } else { acc });
    if !min.is_finite() && !rho_physical.is_empty() {
        return Err(Error::NonFinite("density"));
    }
    if min <= 0.0 {
        return Err(Error::NonpositiveDensity {
            min_density: min,
            index,
        });
    }
    Ok(())
}

/// Applies the linear mode operator `B(k)` to `(c, rho, u)`.
pub fn apply_linear_mode(
    trunc: &Truncation,
    k: &[f64],
    params: &ModelParams,
    x: &[Complex64],
    out: &mut [Complex64],
) {
    let d = trunc.dim();
    let na = trunc.len();
    let (c, rest) = x.split_at(na);
    let rho = rest[0];
    let u = &rest[1..];
    let mut scratch = vec![ZERO; na];
    for (o, p) in out[..na].iter_mut().zip(0..na) {
        *o = c[p] * trunc.fokker_planck_eigenvalue(p);
    }
    for axis in 0..d {
        if k[axis] == 0.0 {
            continue;
        }
        trunc.mul_v_into(axis, c, &mut scratch);
        let ik = Complex64::new(0.0, -k[axis]);
        for (o, s) in out[..na].iter_mut().zip(&scratch) {
            *o += ik * s;
        }
    }
    for axis in 0..d {
        out[1 + axis] += u[axis];
    }
    let k2: f64 = k[..d].iter().map(|x| x * x).sum();
    let cs = params.sound_speed_sq();
    out[na] = -(0..d).map(|i| Complex64::new(0.0, k[i]) * u[i]).sum::<Complex64>();
    for i in 0..d {
        out[na + 1 + i] = Complex64::new(0.0, -k[i] * cs) * rho - u[i] * (params.mu * k2 + 1.0) + c[1 + i];
    }
}

/// Linear increment at every lattice mode.
pub fn linear_rhs(state: &SystemState, params: &ModelParams) -> SystemState {
    let mut out = state.clone();
    let trunc = state.trunc().clone();
    let g = *state.grid();
    let zeros = vec![ZERO; state.mode_len()];
    let mut y = zeros.clone();
    for mode in 0..g.len() {
        let x = state.mode_vector(mode);
        if x == zeros {
            out.set_mode_vector(mode, &zeros);
            continue;
        }
        apply_linear_mode(&trunc, &g.wavevector(mode)[..g.dim()], params, &x, &mut y);
        out.set_mode_vector(mode, &y);
    }
    out
}

/// Band-limited physical samples of every component.
struct Physical {
    c: Vec<Vec<f64>>,
    rho: Vec<f64>,
    u: Vec<Vec<f64>>,
}

fn to_physical(state: &SystemState, tr: &Transformer) -> Result<Physical> {
    let phys = |f: &SpectralField| tr.inverse_transform(&f.band_limited());
    Ok(Physical {
        c: state.f.iter().map(phys).collect::<Result<_>>()?,
        rho: phys(&state.rho)?,
        u: state.vel.iter().map(phys).collect::<Result<_>>()?,
    })
}

fn to_spectral(tr: &Transformer, samples: &[f64]) -> Result<SpectralField> {
    let mut f = tr.transform(samples)?;
    f.truncate_band();
    Ok(f)
}

fn product(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// `w_i = u_i + P(rho u_i)` on the grid.
fn friction_weights(p: &Physical, tr: &Transformer) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut rho_u = Vec::with_capacity(p.u.len());
    let mut w = Vec::with_capacity(p.u.len());
    for ui in &p.u {
        let ru = tr.inverse_transform(&to_spectral(tr, &product(&p.rho, ui))?)?;
        w.push(ui.iter().zip(&ru).map(|(a, b)| a + b).collect());
        rho_u.push(ru);
    }
    Ok((rho_u, w))
}

fn fluid_nonlinear(state: &SystemState, p: &Physical, params: &ModelParams, tr: &Transformer) -> Result<(SpectralField, Vec<SpectralField>)> {
    let d = state.dim();
    let grad_rho: Vec<Vec<f64>> = (0..d)
        .map(|i| tr.inverse_transform(&state.rho.band_limited().derivative(i)))
        .collect::<Result<_>>()?;
    let mut div_u = vec![0.0; p.rho.len()];
    for (i, u) in state.vel.iter().enumerate() {
        let di = tr.inverse_transform(&u.band_limited().derivative(i))?;
        for (a, b) in div_u.iter_mut().zip(&di) {
            *a += b;
        }
    }
    let mut s_rho = vec![0.0; p.rho.len()];
    for x in 0..s_rho.len() {
        let adv: f64 = (0..d).map(|i| grad_rho[i][x] * p.u[i][x]).sum();
        s_rho[x] = -p.rho[x] * div_u[x] - adv;
    }

    let cs = params.sound_speed_sq();
    let pressure_hat = to_spectral(tr, &pressure(&p.rho, params)?)?;
    let visc: Vec<f64> = p.rho.iter().map(|r| params.mu * r / (1.0 + r)).collect();
    let mut s_u = Vec::with_capacity(d);
    for i in 0..d {
        let ui = state.vel[i].band_limited();
        let lap = tr.inverse_transform(&ui.laplacian())?;
        let grads: Vec<Vec<f64>> = (0..d)
            .map(|j| tr.inverse_transform(&ui.derivative(j)))
            .collect::<Result<_>>()?;
        let grad_p = tr.inverse_transform(&pressure_hat.derivative(i))?;
        let mut acc = vec![0.0; p.rho.len()];
        for x in 0..acc.len() {
            let conv: f64 = (0..d).map(|j| p.u[j][x] * grads[j][x]).sum();
            let force = grad_p[x] / (1.0 + p.rho[x]) - cs * grad_rho[i][x];
            acc[x] = -conv - force - visc[x] * lap[x] - p.c[0][x] * p.u[i][x];
        }
        s_u.push(to_spectral(tr, &acc)?);
    }
    Ok((to_spectral(tr, &s_rho)?, s_u))
}

fn check_finite(state: &SystemState) -> Result<()> {
    if state.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("state"))
    }
}

/// Nonlinear increment `(S_f, S_rho, S_u)`.
pub fn nonlinear_rhs(state: &SystemState, params: &ModelParams, tr: &Transformer) -> Result<SystemState> {
    check_finite(state)?;
    let trunc = state.trunc().clone();
    let d = state.dim();
    let p = to_physical(state, tr)?;
    check_density(&p.rho)?;
    let (rho_u, w) = friction_weights(&p, tr)?;

    let mut out = SystemState::zeros(*state.grid(), &trunc)?;
    out.time = state.time;
    let npts = p.rho.len();
    let mut acc = vec![0.0; npts];
    for pos in 0..trunc.len() {
        let lam = trunc.fokker_planck_eigenvalue(pos);
        for (o, (r, c)) in acc.iter_mut().zip(p.rho.iter().zip(&p.c[pos])) {
            *o = lam * r * c;
        }
        // (1 + rho) u . (v / 2 - grad_v) is the raising operator sqrt(a_i) c_{a - e_i}.
        for axis in 0..d {
            if let Some(low) = trunc.lowered(axis, pos) {
                let s = (trunc.index(pos).get(axis) as f64).sqrt();
                for (o, (wi, c)) in acc.iter_mut().zip(w[axis].iter().zip(&p.c[low])) {
                    *o += s * wi * c;
                }
            }
        }
        if let Some(axis) = (0..d).find(|&i| pos == 1 + i) {
            for (o, ru) in acc.iter_mut().zip(&rho_u[axis]) {
                *o += ru;
            }
        }
        out.f[pos] = to_spectral(tr, &acc)?;
    }
    let (s_rho, s_u) = fluid_nonlinear(state, &p, params, tr)?;
    out.rho = s_rho;
    out.vel = s_u;
    Ok(out)
}

/// The kinetic nonlinearity in the `G / h` form
/// `div_v G - v . G / 2 + (1 + rho) a u . v sqrt(M) + h + rho (u - b) . v sqrt(M)`
/// with `G = -(1 + rho) u {I - P_0} f` and `h = rho L {I - P} f`,
/// assembled with the velocity ladders instead of the raising shortcut.
pub fn kinetic_nonlinear_macro_micro(state: &SystemState, tr: &Transformer) -> Result<Vec<SpectralField>> {
    let trunc = state.trunc().clone();
    let d = state.dim();
    let na = trunc.len();
    let p = to_physical(state, tr)?;
    check_density(&p.rho)?;
    let (_, w) = friction_weights(&p, tr)?;
    let npts = p.rho.len();
    let mut acc = vec![vec![0.0; npts]; na];
    let mut gi = vec![ZERO; na];
    let mut t1 = vec![ZERO; na];
    let mut t2 = vec![ZERO; na];
    for x in 0..npts {
        for axis in 0..d {
            gi[0] = ZERO;
            for pos in 1..na {
                gi[pos] = Complex64::new(-w[axis][x] * p.c[pos][x], 0.0);
            }
            trunc.diff_v_into(axis, &gi, &mut t1);
            trunc.mul_v_into(axis, &gi, &mut t2);
            for pos in 0..na {
                acc[pos][x] += t1[pos].re - 0.5 * t2[pos].re;
            }
            acc[1 + axis][x] += w[axis][x] * p.c[0][x];
        }
    }
    // h and rho (u - b) . v sqrt(M) need only pairwise products.
    let mut out = Vec::with_capacity(na);
    for pos in 0..na {
        let lam = trunc.fokker_planck_eigenvalue(pos);
        let micro = if pos > d { lam } else { 0.0 };
        let row = &mut acc[pos];
        for x in 0..npts {
            row[x] += micro * p.rho[x] * p.c[pos][x];
        }
        if (1..=d).contains(&pos) {
            let ru = product(&p.rho, &p.u[pos - 1]);
            for x in 0..npts {
                row[x] += ru[x] - p.rho[x] * p.c[pos][x];
            }
        }
        out.push(to_spectral(tr, row)?);
    }
    Ok(out)
}

/// `linear_rhs + nonlinear_rhs`.
pub fn full_rhs(state: &SystemState, params: &ModelParams, tr: &Transformer) -> Result<SystemState> {
    let mut out = nonlinear_rhs(state, params, tr)?;
    out.axpy(1.0, &linear_rhs(state, params));
    Ok(out)
}
