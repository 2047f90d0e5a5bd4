//! Per-wavenumber linear theory: the mode matrix `B(k)`, spectral abscissae,
//! the mode Lyapunov functional `E_F`, gap certificates, semigroup decay
//! curves and power-law / exponential fits.
//!
//! Mode vectors are ordered `(c_a for a in truncation order, rho, u_1..u_d)`.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, expm, kernel_dimension, CMatrix};
use crate::spectral::cutoff_low;
use crate::state::{macro_cross_density, ModelParams};
use crate::velocity::Truncation;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// The linear operator of one Fourier mode.
#[derive(Clone, Debug)]
pub struct ModeMatrix {
    pub k: Vec<f64>,
    pub trunc: Arc<Truncation>,
    pub matrix: CMatrix,
}

impl ModeMatrix {
    pub fn dim(&self) -> usize {
        self.trunc.dim()
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn k_norm(&self) -> f64 {
        self.k.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        (&self.matrix * DVector::from_column_slice(x)).as_slice().to_vec()
    }

    /// `exp(t B(k))`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        expm(&(&self.matrix * Complex64::new(t, 0.0)))
    }
}

/// Assembles `B(k)` from the ladder matrices.
pub fn build_mode_matrix(k: &[f64], trunc: &Arc<Truncation>, params: &ModelParams) -> ModeMatrix {
    let d = trunc.dim();
    let na = trunc.len();
    let n = na + 1 + d;
    let mut m = CMatrix::zeros(n, n);
    for p in 0..na {
        m[(p, p)] = Complex64::new(trunc.fokker_planck_eigenvalue(p), 0.0);
    }
    for axis in 0..d {
        let v = trunc.v_matrix(axis);
        for r in 0..na {
            for c in 0..na {
                if v[(r, c)] != 0.0 {
                    m[(r, c)] += Complex64::new(0.0, -k[axis] * v[(r, c)]);
                }
            }
        }
    }
    let cs = params.sound_speed_sq();
    let k2: f64 = k[..d].iter().map(|x| x * x).sum();
    let rho = na;
    for i in 0..d {
        let ui = na + 1 + i;
        m[(1 + i, ui)] += ONE;
        m[(rho, ui)] = Complex64::new(0.0, -k[i]);
        m[(ui, rho)] = Complex64::new(0.0, -k[i] * cs);
        m[(ui, ui)] = Complex64::new(-(params.mu * k2 + 1.0), 0.0);
        m[(ui, 1 + i)] = ONE;
    }
    ModeMatrix {
        k: k[..d].to_vec(),
        trunc: Arc::clone(trunc),
        matrix: m,
    }
}

/// Dimension of the kernel of `B(k)` (singular values below `1e-10` relative).
pub fn mode_kernel_dimension(m: &ModeMatrix) -> usize {
    kernel_dimension(&m.matrix, 1e-10)
}

/// Largest real part of the spectrum; with `exclude_conserved` at `k = 0` the
/// `d + 2` eigenvalues closest to zero (the conserved directions) are removed.
pub fn spectral_abscissa(m: &ModeMatrix, exclude_conserved: bool) -> Result<f64> {
    let mut ev = eigenvalues(&m.matrix)?;
    if exclude_conserved && m.k_norm() == 0.0 {
        ev.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        ev.drain(..(m.dim() + 2).min(ev.len()));
    }
    ev.iter()
        .map(|z| z.re)
        .reduce(f64::max)
        .ok_or_else(|| Error::Eigen("empty spectrum".into()))
}

/// A fixed generic unit direction in `d` dimensions.
pub fn generic_direction(dim: usize) -> Vec<f64> {
    match dim {
        1 => vec![1.0],
        2 => vec![0.6, 0.8],
        _ => vec![1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0],
    }
}

fn scaled(dir: &[f64], s: f64) -> Vec<f64> {
    dir.iter().map(|x| x * s).collect()
}

/// One row of a spectral survey.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpectrumRow {
    pub k: f64,
    pub abscissa: f64,
    /// `-abscissa`.
    pub rate: f64,
    /// `rate (1 + |k|^2) / |k|^2`.
    pub shape_ratio: f64,
}

/// Abscissa of `B(|k| e)` along the generic direction for each `|k| > 0`.
pub fn spectrum_survey(kmags: &[f64], trunc: &Arc<Truncation>, params: &ModelParams) -> Result<Vec<SpectrumRow>> {
    let dir = generic_direction(trunc.dim());
    kmags
        .iter()
        .map(|&km| {
            if !(km > 0.0) {
                return Err(Error::InvalidArgument(format!("survey wavenumbers must be positive, got {km}")));
            }
            let a = spectral_abscissa(&build_mode_matrix(&scaled(&dir, km), trunc, params), false)?;
            Ok(SpectrumRow {
                k: km,
                abscissa: a,
                rate: -a,
                shape_ratio: -a * (1.0 + km * km) / (km * km),
            })
        })
        .collect()
}

/// Largest `c` with `rate(k) >= c |k|^2 / (1 + |k|^2)` across a survey.
pub fn gap_shape_constant(rows: &[SpectrumRow]) -> f64 {
    rows.iter().map(|r| r.shape_ratio).fold(f64::INFINITY, f64::min)
}

/// Log-spaced points on `[lo, hi]`.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// The mode Lyapunov functional
/// `E_F = |c|^2 + P'(1) |rho|^2 + |u|^2 + tau4 Re E_1(f) + tau5 Re(u | i k rho) / (1 + |k|^2)`
/// with `(x | y) = x . conj(y)` and
/// `E_1(f) = ((i k_i b_j + i k_j b_i | Gamma_ij({I - P} f)) - (a | i k . b)) / (1 + |k|^2)`.
pub fn lyapunov_value(k: &[f64], x: &[Complex64], trunc: &Truncation, tau4: f64, tau5: f64, sound_speed_sq: f64) -> f64 {
    let d = trunc.dim();
    let na = trunc.len();
    let c = &x[..na];
    let rho = x[na];
    let u = &x[na + 1..];
    let k2: f64 = k[..d].iter().map(|v| v * v).sum();
    let mut micro = c.to_vec();
    for z in &mut micro[..=d] {
        *z = ZERO;
    }
    let e1 = macro_cross_density(trunc, k, c[0], &c[1..=d], &micro) / (1.0 + k2);
    let cross: f64 = (0..d)
        .map(|i| (u[i] * (Complex64::new(0.0, k[i]) * rho).conj()).re)
        .sum::<f64>()
        / (1.0 + k2);
    let plain = c.iter().map(|z| z.norm_sqr()).sum::<f64>()
        + sound_speed_sq * rho.norm_sqr()
        + u.iter().map(|z| z.norm_sqr()).sum::<f64>();
    plain + tau4 * e1 + tau5 * cross
}

/// Hermitian matrix `Q` of a real quadratic form `q(x) = x^* Q x`, by polarization.
pub fn quadratic_form_matrix(n: usize, q: impl Fn(&[Complex64]) -> f64) -> CMatrix {
    let mut e = vec![ZERO; n];
    let mut diag = vec![0.0; n];
    for i in 0..n {
        e[i] = ONE;
        diag[i] = q(&e);
        e[i] = ZERO;
    }
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = Complex64::new(diag[i], 0.0);
        for j in (i + 1)..n {
            e[i] = ONE;
            e[j] = ONE;
            let re = 0.5 * (q(&e) - diag[i] - diag[j]);
            e[j] = Complex64::new(0.0, 1.0);
            // x^* Q x with x = e_i + i e_j gives diag_i + diag_j + 2 Re(i Q_ij).
            let im = -0.5 * (q(&e) - diag[i] - diag[j]);
            e[i] = ZERO;
            e[j] = ZERO;
            m[(i, j)] = Complex64::new(re, im);
            m[(j, i)] = Complex64::new(re, -im);
        }
    }
    m
}

/// Largest `s` with `x^*(Q B + B^* Q) x <= s x^* Q x`, i.e. the worst
/// instantaneous growth rate of `q` along `dx/dt = B x`. Requires `Q > 0`.
pub fn worst_growth_rate(q: &CMatrix, b: &CMatrix) -> Result<f64> {
    let chol = q
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Eigen("quadratic form is not positive definite".into()))?;
    let l = chol.l();
    let s = q * b + b.adjoint() * q;
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;
    let mut m = &linv * s * linv.adjoint();
    let mh = m.adjoint();
    m = (m + mh) * Complex64::new(0.5, 0.0);
    let ev = m.symmetric_eigenvalues();
    Ok(ev.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Smallest generalized eigenvalue of `(A, Q)` for Hermitian `A` and `Q > 0`.
pub fn min_relative_eigenvalue(a: &CMatrix, q: &CMatrix) -> Result<f64> {
    let l = q
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Eigen("quadratic form is not positive definite".into()))?
        .l();
    let linv = l.try_inverse().ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;
    let mut m = &linv * a * linv.adjoint();
    let mh = m.adjoint();
    m = (m + mh) * Complex64::new(0.5, 0.0);
    Ok(m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min))
}

/// Per-wavenumber outcome of the gap certificate.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GapMargin {
    pub k: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapCertificate {
    pub lambda_hat: f64,
    pub tau4: f64,
    pub tau5: f64,
    pub margins: Vec<GapMargin>,
}

/// Sampling parameters of [`gap_certificate`].
#[derive(Clone, Copy, Debug)]
pub struct CertificateOptions {
    pub trials: usize,
    pub t_max: f64,
    pub dt: f64,
    pub seed: u64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self {
            trials: 8,
            t_max: 50.0,
            dt: 0.25,
            seed: 7,
        }
    }
}

/// Random complex vector with entries uniform in the unit square.
pub fn random_mode_vector(rng: &mut impl Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// For each `|k|`, evolves random mode states under `exp(t B(k))` and records
/// the largest `lambda` with `E_F(t) <= exp(-lambda |k|^2 t / (1 + |k|^2)) E_F(0)`
/// on `(0, t_max]` for every trial; `lambda_hat` is the minimum over `k`.
pub fn gap_certificate(
    kmags: &[f64],
    trunc: &Arc<Truncation>,
    params: &ModelParams,
    tau4: f64,
    tau5: f64,
    opts: &CertificateOptions,
) -> Result<GapCertificate> {
    if kmags.is_empty() || kmags.iter().any(|&k| !(k > 0.0)) {
        return Err(Error::InvalidArgument("certificate needs nonzero wavenumbers".into()));
    }
    let dir = generic_direction(trunc.dim());
    let cs = params.sound_speed_sq();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let steps = (opts.t_max / opts.dt).round() as usize;
    let mut margins = Vec::with_capacity(kmags.len());
    for &km in kmags {
        let k = scaled(&dir, km);
        let m = build_mode_matrix(&k, trunc, params);
        let step = m.propagator(opts.dt);
        let shape = km * km / (1.0 + km * km);
        let mut lambda = f64::INFINITY;
        for _ in 0..opts.trials {
            let mut x = DVector::from_vec(random_mode_vector(&mut rng, m.size()));
            let e0 = lyapunov_value(&k, x.as_slice(), trunc, tau4, tau5, cs);
            for s in 1..=steps {
                x = &step * x;
                let e = lyapunov_value(&k, x.as_slice(), trunc, tau4, tau5, cs);
                let t = s as f64 * opts.dt;
                lambda = lambda.min(-(e / e0).ln() / (shape * t));
            }
        }
        margins.push(GapMargin { k: km, lambda });
    }
    let lambda_hat = margins.iter().map(|m| m.lambda).fold(f64::INFINITY, f64::min);
    Ok(GapCertificate {
        lambda_hat,
        tau4,
        tau5,
        margins,
    })
}

/// Runs [`gap_certificate`] at `(tau4, tau5)` and, if that fails, over a small
/// grid of alternative weights; returns the first positive certificate.
pub fn certify_gap(
    kmags: &[f64],
    trunc: &Arc<Truncation>,
    params: &ModelParams,
    tau4: f64,
    tau5: f64,
    opts: &CertificateOptions,
) -> Result<GapCertificate> {
    let first = gap_certificate(kmags, trunc, params, tau4, tau5, opts)?;
    if first.lambda_hat > 0.0 {
        return Ok(first);
    }
    let grid = [0.2, 0.1, 0.05, 0.02, 0.01];
    let mut best = first;
    for &t4 in &grid {
        for &t5 in &grid {
            let c = gap_certificate(kmags, trunc, params, t4, t5, opts)?;
            if c.lambda_hat > 0.0 {
                return Ok(c);
            }
            if c.lambda_hat > best.lambda_hat {
                best = c;
            }
        }
    }
    Err(Error::Certificate(best.lambda_hat))
}

/// Radial initial data `U0(k) = exp(-|k|^2) w` with a constant unit vector `w`.
/// Only the scalar slots `a` and `rho` of `w` may be nonzero, which makes
/// `|exp(t B(k)) U0(k)|` depend on `|k|` alone.
#[derive(Clone, Debug)]
pub struct DecayProfile {
    pub vector: Vec<Complex64>,
}

impl DecayProfile {
    /// `w = (e_a + e_rho) / sqrt(2)`.
    pub fn flat(trunc: &Truncation) -> Self {
        let n = trunc.len() + 1 + trunc.dim();
        let mut v = vec![ZERO; n];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        v[0] = Complex64::new(s, 0.0);
        v[trunc.len()] = Complex64::new(s, 0.0);
        Self { vector: v }
    }

    pub fn amplitude(&self, kmag: f64) -> f64 {
        (-kmag * kmag).exp()
    }
}

/// Radial shells for the `k` integral.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RadialQuadrature {
    pub k_min: f64,
    pub k_max: f64,
    pub shells: usize,
}

impl Default for RadialQuadrature {
    fn default() -> Self {
        Self {
            k_min: 1e-3,
            k_max: 20.0,
            shells: 400,
        }
    }
}

impl RadialQuadrature {
    /// Shell radii and trapezoid weights for `int_{k_min}^{k_max} g(r) dr`
    /// in the variable `ln r`.
    pub fn nodes(&self) -> (Vec<f64>, Vec<f64>) {
        let r = log_space(self.k_min, self.k_max, self.shells);
        let h = if self.shells > 1 {
            (self.k_max / self.k_min).ln() / (self.shells - 1) as f64
        } else {
            0.0
        };
        let w = r
            .iter()
            .enumerate()
            .map(|(i, ri)| {
                let end = i == 0 || i + 1 == self.shells;
                ri * h * if end { 0.5 } else { 1.0 }
            })
            .collect();
        (r, w)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Share of the initial integrand carried by the outermost shell.
    pub tail_fraction: f64,
    pub warning: Option<String>,
}

/// `(int |k|^{2m} |exp(t B(k)) U0(k)|^2 dk)^{1/2}` for `d = 3` radial data,
/// `dk = 4 pi r^2 dr`, optionally weighted by `phi_0(|k|)^2` (`low_cutoff = Some(r0)`).
/// Times must be nondecreasing and start at `t >= 0`.
pub fn semigroup_decay_curve(
    trunc: &Arc<Truncation>,
    params: &ModelParams,
    profile: &DecayProfile,
    times: &[f64],
    m: usize,
    quad: &RadialQuadrature,
    low_cutoff: Option<f64>,
) -> Result<DecayCurve> {
    if trunc.dim() != 3 {
        return Err(Error::InvalidArgument("decay curves use the three-dimensional radial rule".into()));
    }
    if times.is_empty() || times[0] < 0.0 || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("times must be nondecreasing and nonnegative".into()));
    }
    let (radii, weights) = quad.nodes();
    let mut acc = vec![0.0; times.len()];
    let mut initial = Vec::with_capacity(radii.len());
    for (&r, &w) in radii.iter().zip(&weights) {
        let mm = build_mode_matrix(&[r, 0.0, 0.0], trunc, params);
        let cut = low_cutoff.map_or(1.0, |r0| cutoff_low(r, r0));
        let jac = 4.0 * std::f64::consts::PI * r * r * r.powi(2 * m as i32) * w * cut * cut;
        let amp = profile.amplitude(r);
        let mut x = DVector::from_iterator(profile.vector.len(), profile.vector.iter().map(|z| z * amp));
        initial.push(jac * x.norm_squared());
        if jac == 0.0 {
            continue;
        }
        let mut t_prev = 0.0;
        let mut step_dt = f64::NAN;
        let mut step = CMatrix::identity(mm.size(), mm.size());
        for (slot, &t) in acc.iter_mut().zip(times) {
            let dt = t - t_prev;
            if dt > 0.0 {
                if dt != step_dt {
                    step = mm.propagator(dt);
                    step_dt = dt;
                }
                x = &step * x;
            }
            t_prev = t;
            *slot += jac * x.norm_squared();
        }
    }
    let total: f64 = initial.iter().sum();
    let tail_fraction = initial.last().copied().unwrap_or(0.0) / total.max(f64::MIN_POSITIVE);
    let warning = (tail_fraction > 0.01).then(|| format!("k_max too small: outer shell carries {tail_fraction:.3e} of the initial value"));
    Ok(DecayCurve {
        times: times.to_vec(),
        values: acc.iter().map(|v| v.sqrt()).collect(),
        tail_fraction,
        warning,
    })
}

/// Least-squares line fit.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return Err(Error::Fit(format!("need at least two paired samples, got {n}")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
        residual: (ss_res / nf).sqrt(),
    })
}

fn windowed(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>)> {
    if times.len() != values.len() {
        return Err(Error::SizeMismatch {
            expected: times.len(),
            actual: values.len(),
        });
    }
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t >= window.0 && t <= window.1 {
            if !(v > 0.0) {
                return Err(Error::Fit(format!("nonpositive value {v} at t = {t}")));
            }
            ts.push(t);
            vs.push(v);
        }
    }
    Ok((ts, vs))
}

/// Power-law fit of a decay series.
#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub fitted_exponent: f64,
    pub fit_window: (f64, f64),
    pub residual: f64,
}

/// Slope of `ln value` against `ln(1 + t)` over the window.
pub fn fit_decay_exponent(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let (ts, vs) = windowed(times, values, window)?;
    let xs: Vec<f64> = ts.iter().map(|t| (1.0 + t).ln()).collect();
    let ys: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
    let fit = fit_line(&xs, &ys)?;
    Ok(DecayFit {
        times: times.to_vec(),
        values: values.to_vec(),
        fitted_exponent: fit.slope,
        fit_window: window,
        residual: fit.residual,
    })
}

/// Exponential fit `value ~ C exp(-rate t)` over the window.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExponentialFit {
    pub rate: f64,
    pub r_squared: f64,
    pub residual: f64,
}

pub fn fit_exponential(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<ExponentialFit> {
    let (ts, vs) = windowed(times, values, window)?;
    let ys: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
    let fit = fit_line(&ts, &ys)?;
    Ok(ExponentialFit {
        rate: -fit.slope,
        r_squared: fit.r_squared,
        residual: fit.residual,
    })
}
