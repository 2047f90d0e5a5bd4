//! System state `(f, rho, u)` and the norms and functionals of the energy
//! method: mixed `H^2_{x,v}` norms, `Z_q` norms, the first- and second-order
//! energy/dissipation pairs, conserved integrals and the positivity monitor.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{cutoff_high, homogeneous_weights, lebesgue_norm_samples, Grid, SpectralField, Transformer};
use crate::velocity::{QuadratureRule, Truncation};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Viscosity and the pressure law `P(n) = c0 n^gamma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu: f64,
    pub gamma: f64,
    pub c0: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            gamma: 1.4,
            c0: 1.0,
        }
    }
}

impl ModelParams {
    pub fn new(mu: f64, gamma: f64, c0: f64) -> Result<Self> {
        let p = Self { mu, gamma, c0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::InvalidArgument(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.gamma > 1.0) {
            return Err(Error::InvalidArgument(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.c0 > 0.0) {
            return Err(Error::InvalidArgument(format!("c0 must be positive, got {}", self.c0)));
        }
        Ok(())
    }

    /// `P'(1) = c0 gamma`.
    pub fn sound_speed_sq(&self) -> f64 {
        self.c0 * self.gamma
    }
}

/// Weights of the Lyapunov functionals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyWeights {
    /// `tau_1 .. tau_7`.
    pub tau: [f64; 7],
    /// `C_1, C_2` of the mixed-derivative term.
    pub c_mixed: [f64; 2],
}

impl Default for EnergyWeights {
    fn default() -> Self {
        Self {
            tau: [0.05, 0.05, 0.005, 0.1, 0.1, 0.05, 0.05],
            c_mixed: [1.0, 1.0],
        }
    }
}

impl EnergyWeights {
    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.tau.iter().enumerate() {
            if !(*t > 0.0 && *t < 1.0) {
                return Err(Error::InvalidArgument(format!("tau{} must lie in (0, 1), got {t}", i + 1)));
            }
        }
        if self.tau[2] > self.tau[0] / 10.0 {
            return Err(Error::InvalidArgument(format!(
                "tau3 = {} must not exceed tau1 / 10 = {}",
                self.tau[2],
                self.tau[0] / 10.0
            )));
        }
        if self.c_mixed.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::InvalidArgument("mixed-derivative constants must be positive".into()));
        }
        Ok(())
    }

    pub fn tau(&self, i: usize) -> f64 {
        self.tau[i - 1]
    }
}

/// The perturbation triple on one grid and one Hermite truncation.
#[derive(Clone, Debug)]
pub struct SystemState {
    grid: Grid,
    trunc: Arc<Truncation>,
    /// One spectral field per retained Hermite index.
    pub f: Vec<SpectralField>,
    pub rho: SpectralField,
    /// One spectral field per velocity component.
    pub vel: Vec<SpectralField>,
    pub time: f64,
}

impl SystemState {
    pub fn zeros(grid: Grid, trunc: &Arc<Truncation>) -> Result<Self> {
        if grid.dim() != trunc.dim() {
            return Err(Error::InvalidArgument(format!(
                "grid dimension {} differs from velocity dimension {}",
                grid.dim(),
                trunc.dim()
            )));
        }
        Ok(Self {
            grid,
            trunc: Arc::clone(trunc),
            f: vec![SpectralField::zeros(grid); trunc.len()],
            rho: SpectralField::zeros(grid),
            vel: vec![SpectralField::zeros(grid); grid.dim()],
            time: 0.0,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn trunc(&self) -> &Arc<Truncation> {
        &self.trunc
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Length of the per-mode state vector `(c_a, rho, u)`.
    pub fn mode_len(&self) -> usize {
        self.trunc.len() + 1 + self.dim()
    }

    /// Hermite coefficients of `f_hat(k)` at one lattice mode.
    pub fn coeffs_at(&self, mode: usize) -> Vec<Complex64> {
        self.f.iter().map(|fa| fa.coeffs()[mode]).collect()
    }

    /// `(c_a, rho, u)` at one lattice mode.
    pub fn mode_vector(&self, mode: usize) -> Vec<Complex64> {
        let mut v = self.coeffs_at(mode);
        v.push(self.rho.coeffs()[mode]);
        v.extend(self.vel.iter().map(|u| u.coeffs()[mode]));
        v
    }

    pub fn set_mode_vector(&mut self, mode: usize, v: &[Complex64]) {
        let na = self.trunc.len();
        for (fa, z) in self.f.iter_mut().zip(&v[..na]) {
            fa.coeffs_mut()[mode] = *z;
        }
        self.rho.coeffs_mut()[mode] = v[na];
        for (u, z) in self.vel.iter_mut().zip(&v[na + 1..]) {
            u.coeffs_mut()[mode] = *z;
        }
    }

    /// Every spectral component, in mode-vector order.
    pub fn components(&self) -> impl Iterator<Item = &SpectralField> {
        self.f.iter().chain(std::iter::once(&self.rho)).chain(self.vel.iter())
    }

    pub fn components_mut(&mut self) -> impl Iterator<Item = &mut SpectralField> {
        self.f
            .iter_mut()
            .chain(std::iter::once(&mut self.rho))
            .chain(self.vel.iter_mut())
    }

    /// `a = <sqrt(M), f>` as a spectral field.
    pub fn a(&self) -> &SpectralField {
        &self.f[0]
    }

    /// `b_i = <v_i sqrt(M), f>`.
    pub fn b(&self, axis: usize) -> &SpectralField {
        &self.f[1 + axis]
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Self) {
        for (x, y) in self.components_mut().zip(other.components()) {
            for (a, b) in x.coeffs_mut().iter_mut().zip(y.coeffs()) {
                *a += b * s;
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for c in out.components_mut() {
            for z in c.coeffs_mut() {
                *z *= s;
            }
        }
        out
    }

    /// Coefficient-space `||(f, rho, u)||_{L^2}^2` (plain sum of the three).
    pub fn l2_norm_sq(&self) -> f64 {
        self.components().map(|c| c.l2_norm_sq()).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.components()
            .zip(other.components())
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.components()
            .all(|c| c.coeffs().iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// Projects every component on Hermitian-symmetric (real) data.
    pub fn symmetrize(&mut self) {
        for c in self.components_mut() {
            c.symmetrize();
        }
    }

    pub fn truncate_band(&mut self) {
        for c in self.components_mut() {
            c.truncate_band();
        }
    }

    /// `min_x (1 + rho(x))` and where it is attained.
    pub fn density_min(&self, tr: &Transformer) -> Result<(f64, usize)> {
        let rho = tr.inverse_transform(&self.rho)?;
        Ok(rho
            .iter()
            .enumerate()
            .map(|(i, r)| (1.0 + r, i))
            .fold((f64::INFINITY, 0), |acc, x| if x.0 < acc.0 { x } else { acc }))
    }

    /// Physical values of every Hermite coefficient field `c_a(x)`.
    pub fn physical_coeffs(&self, tr: &Transformer) -> Result<Vec<Vec<Complex64>>> {
        self.f.iter().map(|fa| tr.inverse_complex(fa)).collect()
    }
}

/// Per-mode helpers shared by the functionals.
struct ModeView<'a> {
    trunc: &'a Truncation,
    k: &'a [f64],
    k2: f64,
    dim: usize,
}

impl<'a> ModeView<'a> {
    fn new(trunc: &'a Truncation, k: &'a [f64]) -> Self {
        let dim = trunc.dim();
        Self {
            trunc,
            k,
            k2: k[..dim].iter().map(|x| x * x).sum(),
            dim,
        }
    }

    fn micro(&self, c: &[Complex64]) -> Vec<Complex64> {
        let mut m = c.to_vec();
        for z in &mut m[..=self.dim] {
            *z = ZERO;
        }
        m
    }

    /// `sum_ij Re((i k_i b_j + i k_j b_i) conj(Gamma_ij)) - Re(a conj(i k.b))`
    /// for the given macro coefficients and micro vector.
    fn macro_cross(&self, a: Complex64, b: &[Complex64], micro: &[Complex64]) -> f64 {
        let ik = |i: usize| Complex64::new(0.0, self.k[i]);
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let sym = ik(i) * b[j] + ik(j) * b[i];
                s += (sym * self.trunc.gamma_slice(micro, i, j).conj()).re;
            }
        }
        let div_b: Complex64 = (0..self.dim).map(|i| ik(i) * b[i]).sum();
        s - (a * div_b.conj()).re
    }

    /// `Re(u . conj(i k rho))`.
    fn u_grad_rho(&self, u: &[Complex64], rho: Complex64) -> f64 {
        (0..self.dim)
            .map(|i| (u[i] * (Complex64::new(0.0, self.k[i]) * rho).conj()).re)
            .sum()
    }
}

/// `sum_ij Re((i k_i b_j + i k_j b_i) conj(Gamma_ij(micro))) - Re(a conj(i k . b))`.
pub(crate) fn macro_cross_density(
    trunc: &Truncation,
    k: &[f64],
    a: Complex64,
    b: &[Complex64],
    micro: &[Complex64],
) -> f64 {
    ModeView::new(trunc, k).macro_cross(a, b, micro)
}

fn norm_sq(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `sum_{|a| + |b| <= s} ||d_x^a d_v^b f||^2` with velocity derivatives taken
/// through the closed ladder (derivatives of the top degree drop the part
/// leaving the truncation).
pub fn mixed_norm_hxv_sq(state: &SystemState, s: usize) -> Result<f64> {
    if s > 2 {
        return Err(Error::InvalidArgument(format!("mixed norm order must be <= 2, got {s}")));
    }
    let mut total = 0.0;
    for mode in 0..state.grid.len() {
        let c = state.coeffs_at(mode);
        if norm_sq(&c) == 0.0 {
            continue;
        }
        let hx = homogeneous_weights(&state.grid.wavevector(mode)[..state.dim()], s);
        let fam = state.trunc.derivative_family(&c, s);
        for (m, level) in fam.iter().enumerate() {
            let vm: f64 = level.iter().map(|v| norm_sq(v)).sum();
            total += vm * hx[..=(s - m)].iter().sum::<f64>();
        }
    }
    Ok(total * state.grid.parseval_factor())
}

/// Values at one quadrature node of `f(x, v) / sqrt(M(v))` for every `x`.
fn polynomial_part_at(
    phys: &[Vec<Complex64>],
    basis: &[f64],
    out: &mut [Complex64],
) {
    for z in out.iter_mut() {
        *z = ZERO;
    }
    for (ca, &pa) in phys.iter().zip(basis) {
        if pa == 0.0 {
            continue;
        }
        for (o, c) in out.iter_mut().zip(ca) {
            *o += c * pa;
        }
    }
}

/// Values `He_a(v) / sqrt(a!)` of every retained index at a node.
fn hermite_polynomials(trunc: &Truncation, v: &[f64]) -> Vec<f64> {
    let n = trunc.max_degree();
    let tables: Vec<Vec<f64>> = v
        .iter()
        .map(|&x| {
            let mut p = vec![0.0; n + 1];
            p[0] = 1.0;
            if n >= 1 {
                p[1] = x;
            }
            for k in 1..n {
                p[k + 1] = (x * p[k] - (k as f64).sqrt() * p[k - 1]) / ((k + 1) as f64).sqrt();
            }
            p
        })
        .collect();
    trunc
        .indices()
        .iter()
        .map(|m| (0..v.len()).map(|a| tables[a][m.get(a)]).product())
        .collect()
}

/// `||f||_{Z_q} = (int ||f(., v)||_{L^q_x}^2 dv)^{1/2}` using Gauss-Hermite
/// nodes in `v` and the grid rule in `x`.
pub fn zq_norm(state: &SystemState, q: f64, tr: &Transformer) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::InvalidArgument(format!("Z_q exponent must be >= 1, got {q}")));
    }
    let trunc = &state.trunc;
    let rule = QuadratureRule::new(trunc.dim(), trunc.max_degree() + 2)?;
    let phys = state.physical_coeffs(tr)?;
    let mut buf = vec![ZERO; state.grid.len()];
    let mut total = 0.0;
    for (v, w) in rule.nodes().iter().zip(rule.weights()) {
        let basis = hermite_polynomials(trunc, &v[..trunc.dim()]);
        polynomial_part_at(&phys, &basis, &mut buf);
        let lq = lebesgue_norm_samples(&state.grid, buf.iter().map(|z| z.norm()), q)?;
        total += w * lq * lq;
    }
    Ok(total.sqrt())
}

/// `|| ||f(x, .)||_{L^2_v} ||_{L^p_x}`.
pub fn l2v_lp_norm(state: &SystemState, p: f64, tr: &Transformer) -> Result<f64> {
    let phys = state.physical_coeffs(tr)?;
    let mags: Vec<f64> = (0..state.grid.len())
        .map(|x| phys.iter().map(|c| c[x].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    lebesgue_norm_samples(&state.grid, mags.into_iter(), p)
}

/// First-order functionals `(E, D, E0)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FirstOrder {
    pub energy: f64,
    pub dissipation: f64,
    pub e0: f64,
}

/// Second-order functionals `(E1, D1, E0^H)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SecondOrder {
    pub energy: f64,
    pub dissipation: f64,
    pub e0_high: f64,
}

/// Fourier density of `(E, D, E0)` at wavevector `k` for the mode vector
/// `x = (c, rho, u)`; the spatial functionals are `parseval_factor` times the
/// sum of these densities over the lattice.
///
/// All norms enter squared. The leading part is
/// `sum_{|a| <= 2} (||d^a f||^2 + P'(1) ||d^a rho||^2 + ||d^a u||^2)`: spatial
/// derivatives only, with the acoustic weight `P'(1)` on the density. Velocity
/// derivatives enter through the `tau3` mixed term on `{I - P} f`, which keeps
/// `E` nonincreasing along the linear flow at every wavenumber. `E0` pairs `d^a (d_i b_j + d_j b_i)` with
/// `d^a Gamma_ij({I - P} f)` and subtracts `d^a a . d^a div b`, summed over
/// `|a| <= 1`.
pub fn first_order_mode(
    trunc: &Truncation,
    k: &[f64],
    x: &[Complex64],
    params: &ModelParams,
    weights: &EnergyWeights,
) -> FirstOrder {
    let mv = ModeView::new(trunc, k);
    let d = mv.dim;
    let na = trunc.len();
    let c = &x[..na];
    let rho = x[na];
    let u = &x[na + 1..];
    let a = c[0];
    let b = &c[1..=d];
    let micro = mv.micro(c);
    let hx = homogeneous_weights(&k[..d], 2);
    let s2 = hx[0] + hx[1] + hx[2];
    let s1 = hx[0] + hx[1];
    let mut scratch = Vec::new();

    // sum_{|a| <= 2} ||d^a f||^2 + P'(1) ||d^a rho||^2 + ||d^a u||^2
    let mut energy = s2 * (norm_sq(c) + params.sound_speed_sq() * rho.norm_sqr() + norm_sq(u));

    let e0 = s1 * mv.macro_cross(a, b, &micro);
    energy += weights.tau(1) * e0;
    energy += weights.tau(2) * s1 * mv.u_grad_rho(u, rho);

    // tau3 sum_k C_k sum_{|b| = k, |a| + |b| <= 2} ||d_x^a d_v^b {I-P} f||^2
    let micro_fam = trunc.derivative_family(&micro, 2);
    let mut mixed = 0.0;
    for m in 1..=2 {
        let vm: f64 = micro_fam[m].iter().map(|w| norm_sq(w)).sum();
        mixed += weights.c_mixed[m - 1] * vm * hx[..=(2 - m)].iter().sum::<f64>();
    }
    energy += weights.tau(3) * mixed;

    let bu: f64 = (0..d).map(|i| (b[i] - u[i]).norm_sqr()).sum();
    let mut dissipation = s2 * bu;
    dissipation += mv.k2 * s1 * (a.norm_sqr() + norm_sq(b) + rho.norm_sqr());
    dissipation += mv.k2 * s2 * norm_sq(u);
    dissipation += s2 * trunc.nu_norm_sq_slice(&micro, &mut scratch);
    for (m, level) in micro_fam.iter().enumerate() {
        let nm: f64 = level.iter().map(|w| trunc.nu_norm_sq_slice(w, &mut scratch)).sum();
        dissipation += nm * hx[..=(2 - m)].iter().sum::<f64>();
    }
    FirstOrder {
        energy,
        dissipation,
        e0,
    }
}

/// Fourier density of `(E1, D1, E0^H)` at wavevector `k`, with the low/high
/// split at radius `r0` (physical wavenumber units). `nabla^2` denotes the
/// full Hessian, whose Fourier weight is `|k|^4`; the density carries the
/// acoustic weight `P'(1)` as in `E`.
pub fn second_order_mode(
    trunc: &Truncation,
    k: &[f64],
    x: &[Complex64],
    params: &ModelParams,
    weights: &EnergyWeights,
    r0: f64,
) -> SecondOrder {
    let mv = ModeView::new(trunc, k);
    let d = mv.dim;
    let na = trunc.len();
    let c = &x[..na];
    let rho = x[na];
    let u = &x[na + 1..];
    let k4 = mv.k2 * mv.k2;
    let high = cutoff_high(mv.k2.sqrt(), r0);
    let mut scratch = Vec::new();

    let micro = mv.micro(c);
    let micro_h: Vec<Complex64> = micro.iter().map(|z| z * high).collect();
    let a_h = c[0] * high;
    let b_h: Vec<Complex64> = c[1..=d].iter().map(|z| z * high).collect();
    let e0_high = mv.k2 * mv.macro_cross(a_h, &b_h, &micro_h);

    let div_u: Complex64 = (0..d).map(|i| Complex64::new(0.0, k[i]) * u[i]).sum();
    let cross = mv.k2 * (div_u * (rho * high).conj()).re;
    let energy = k4 * (norm_sq(c) + params.sound_speed_sq() * rho.norm_sqr() + norm_sq(u)) + weights.tau(6) * e0_high
        - weights.tau(7) * cross;

    let bu: f64 = (0..d).map(|i| (c[1 + i] - u[i]).norm_sqr()).sum();
    let macro_h = a_h.norm_sqr() + norm_sq(&b_h) + (rho * high).norm_sqr();
    let dissipation = k4 * (bu + macro_h + norm_sq(u) + trunc.nu_norm_sq_slice(&micro, &mut scratch));
    SecondOrder {
        energy,
        dissipation,
        e0_high,
    }
}

/// The temporal energy `E`, dissipation `D` and macro cross functional `E0`.
pub fn first_order_functionals(state: &SystemState, params: &ModelParams, weights: &EnergyWeights) -> FirstOrder {
    let mut total = FirstOrder::default();
    for mode in 0..state.grid.len() {
        let x = state.mode_vector(mode);
        if norm_sq(&x) == 0.0 {
            continue;
        }
        let k = state.grid.wavevector(mode);
        let m = first_order_mode(&state.trunc, &k, &x, params, weights);
        total.energy += m.energy;
        total.dissipation += m.dissipation;
        total.e0 += m.e0;
    }
    let pf = state.grid.parseval_factor();
    FirstOrder {
        energy: total.energy * pf,
        dissipation: total.dissipation * pf,
        e0: total.e0 * pf,
    }
}

/// `E1`, `D1` and the high-frequency cross functional `E0^H`.
pub fn second_order_functionals(
    state: &SystemState,
    params: &ModelParams,
    weights: &EnergyWeights,
    r0: f64,
) -> SecondOrder {
    let mut total = SecondOrder::default();
    for mode in 0..state.grid.len() {
        let x = state.mode_vector(mode);
        if norm_sq(&x) == 0.0 {
            continue;
        }
        let k = state.grid.wavevector(mode);
        let m = second_order_mode(&state.trunc, &k, &x, params, weights, r0);
        total.energy += m.energy;
        total.dissipation += m.dissipation;
        total.e0_high += m.e0_high;
    }
    let pf = state.grid.parseval_factor();
    SecondOrder {
        energy: total.energy * pf,
        dissipation: total.dissipation * pf,
        e0_high: total.e0_high * pf,
    }
}

/// `||nabla^2 (a^L, b^L, rho^L, u^L)||^2`: the low-frequency source of the
/// second-order energy inequality.
pub fn low_frequency_source(state: &SystemState, r0: f64) -> f64 {
    let d = state.dim();
    let g = state.grid;
    let mut total = 0.0;
    for mode in 0..g.len() {
        let k2 = g.k_norm_sq(mode);
        let low = crate::spectral::cutoff_low(k2.sqrt(), r0);
        if low == 0.0 {
            continue;
        }
        let mut s = state.rho.coeffs()[mode].norm_sqr();
        for fa in &state.f[..=d] {
            s += fa.coeffs()[mode].norm_sqr();
        }
        for u in &state.vel {
            s += u.coeffs()[mode].norm_sqr();
        }
        total += k2 * k2 * low * low * s;
    }
    total * g.parseval_factor()
}

/// `(int a dx, int rho dx, int (b + (1 + rho) u) dx)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conserved {
    pub particle_mass: f64,
    pub fluid_mass: f64,
    pub momentum: Vec<f64>,
}

impl Conserved {
    /// Largest absolute difference between two triples.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut m = (self.particle_mass - other.particle_mass)
            .abs()
            .max((self.fluid_mass - other.fluid_mass).abs());
        for (a, b) in self.momentum.iter().zip(&other.momentum) {
            m = m.max((a - b).abs());
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs_diff(&Self {
            particle_mass: 0.0,
            fluid_mass: 0.0,
            momentum: vec![0.0; self.momentum.len()],
        })
    }
}

pub fn conserved_quantities(state: &SystemState, tr: &Transformer) -> Result<Conserved> {
    let mf = state.grid.mean_factor();
    let mut momentum = Vec::with_capacity(state.dim());
    for axis in 0..state.dim() {
        let rho_u = tr.dealiased_product(&state.rho, &state.vel[axis])?;
        let z = state.b(axis).coeffs()[0] + state.vel[axis].coeffs()[0] + rho_u.coeffs()[0];
        momentum.push(z.re * mf);
    }
    Ok(Conserved {
        particle_mass: state.a().coeffs()[0].re * mf,
        fluid_mass: state.rho.coeffs()[0].re * mf,
        momentum,
    })
}

/// Scale for relative conservation drift: `|Omega|^{1/2} ||(f, rho, u)||_{L^2}`
/// bounds each conserved integral of a state of that size.
pub fn conservation_scale(state: &SystemState) -> f64 {
    (state.grid.volume() * state.l2_norm_sq()).sqrt()
}

/// `min_{x, v} M(v) + sqrt(M(v)) f(x, v)` over the grid and the probe nodes.
pub fn positivity_min(state: &SystemState, probe: &QuadratureRule, tr: &Transformer) -> Result<f64> {
    let trunc = &state.trunc;
    let phys = state.physical_coeffs(tr)?;
    let mut buf = vec![ZERO; state.grid.len()];
    let mut min = f64::INFINITY;
    for v in probe.nodes() {
        let v = &v[..trunc.dim()];
        let m = crate::velocity::maxwellian(v);
        let basis = hermite_polynomials(trunc, v);
        polynomial_part_at(&phys, &basis, &mut buf);
        // F = M (1 + f / sqrt(M)) and f / sqrt(M) is the polynomial part.
        for z in &buf {
            min = min.min(m * (1.0 + z.re));
        }
    }
    Ok(min)
}

/// One time sample of the monitored quantities.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub zq2: f64,
    pub h2_f: f64,
    pub h2_rho: f64,
    pub h2_u: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "D")]
    pub dissipation: f64,
    #[serde(rename = "E1")]
    pub energy1: f64,
    #[serde(rename = "D1")]
    pub dissipation1: f64,
    pub mass_p: f64,
    pub mass_f: f64,
    pub mom_x: f64,
    pub mom_y: f64,
    pub mom_z: f64,
    pub pos_min: f64,
    pub grad_f: f64,
    pub grad_rho: f64,
    pub grad_u: f64,
}

impl DiagnosticsRecord {
    pub const COLUMNS: [&'static str; 18] = [
        "time", "zq2", "h2_f", "h2_rho", "h2_u", "E", "D", "E1", "D1", "mass_p", "mass_f", "mom_x", "mom_y",
        "mom_z", "pos_min", "grad_f", "grad_rho", "grad_u",
    ];

    pub fn values(&self) -> [f64; 18] {
        [
            self.time,
            self.zq2,
            self.h2_f,
            self.h2_rho,
            self.h2_u,
            self.energy,
            self.dissipation,
            self.energy1,
            self.dissipation1,
            self.mass_p,
            self.mass_f,
            self.mom_x,
            self.mom_y,
            self.mom_z,
            self.pos_min,
            self.grad_f,
            self.grad_rho,
            self.grad_u,
        ]
    }

    pub fn conserved(&self) -> Conserved {
        Conserved {
            particle_mass: self.mass_p,
            fluid_mass: self.mass_f,
            momentum: vec![self.mom_x, self.mom_y, self.mom_z],
        }
    }
}

/// Everything needed to evaluate a [`DiagnosticsRecord`].
#[derive(Clone, Debug)]
pub struct DiagnosticsContext {
    pub params: ModelParams,
    pub weights: EnergyWeights,
    /// Cutoff radius in physical wavenumber units.
    pub r0: f64,
    pub probe: QuadratureRule,
    pub transformer: Transformer,
}

impl DiagnosticsContext {
    pub fn new(grid: Grid, trunc: &Truncation, params: ModelParams, weights: EnergyWeights, r0: f64) -> Self {
        Self {
            params,
            weights,
            r0,
            probe: QuadratureRule::new(trunc.dim(), trunc.max_degree() + 2).expect("valid probe rule"),
            transformer: Transformer::new(grid),
        }
    }

    pub fn record(&self, state: &SystemState) -> Result<DiagnosticsRecord> {
        let tr = &self.transformer;
        let first = first_order_functionals(state, &self.params, &self.weights);
        let second = second_order_functionals(state, &self.params, &self.weights, self.r0);
        let cons = conserved_quantities(state, tr)?;
        let grad_sq = |f: &SpectralField| f.weighted_norm_sq(|i| state.grid.k_norm_sq(i));
        let h2_u: f64 = state.vel.iter().map(|u| u.sobolev_norm_sq(2)).sum();
        let grad_u: f64 = state.vel.iter().map(grad_sq).sum();
        let grad_f: f64 = state.f.iter().map(grad_sq).sum();
        let mom = |i: usize| cons.momentum.get(i).copied().unwrap_or(0.0);
        Ok(DiagnosticsRecord {
            time: state.time,
            zq2: zq_norm(state, 2.0, tr)?,
            h2_f: mixed_norm_hxv_sq(state, 2)?.sqrt(),
            h2_rho: state.rho.sobolev_norm_sq(2).sqrt(),
            h2_u: h2_u.sqrt(),
            energy: first.energy,
            dissipation: first.dissipation,
            energy1: second.energy,
            dissipation1: second.dissipation,
            mass_p: cons.particle_mass,
            mass_f: cons.fluid_mass,
            mom_x: mom(0),
            mom_y: mom(1),
            mom_z: mom(2),
            pos_min: positivity_min(state, &self.probe, tr)?,
            grad_f: grad_f.sqrt(),
            grad_rho: grad_sq(&state.rho).sqrt(),
            grad_u: grad_u.sqrt(),
        })
    }
}
