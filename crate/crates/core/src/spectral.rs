//! Periodic pseudo-spectral layer.
//!
//! Conventions, used everywhere in the crate:
//!
//! * physical samples sit at `x_j = j L / n` along each axis, stored row-major
//!   (last axis fastest);
//! * the forward transform is the unnormalized DFT
//!   `g_hat(k) = sum_x g(x) exp(-i k.x)` and the inverse carries `1 / n^d`;
//! * hence `||g||_{L^2}^2 = (L^d / n^{2d}) sum_k |g_hat(k)|^2` and
//!   `int g dx = (L^d / n^d) g_hat(0)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Periodic box `[0, L)^d` sampled with `n` points per axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
}

pub fn make_grid(dim: usize, n: usize, length: f64) -> Result<Grid> {
    Grid::new(dim, n, length)
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Grid(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Grid(format!("points per axis must be a power of two >= 8, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Grid(format!("box length must be positive, got {length}")));
        }
        Ok(Self { dim, n, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.length
    }

    /// Total number of grid points (and of lattice wavenumbers).
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lattice spacing `2 pi / L`.
    pub fn dk(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// `(L / n)^d`.
    pub fn cell_volume(&self) -> f64 {
        (self.length / self.n as f64).powi(self.dim as i32)
    }

    /// `L^d`.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Factor turning `sum_k conj(f_hat) g_hat` into `int conj(f) g dx`.
    pub fn parseval_factor(&self) -> f64 {
        self.volume() / (self.len() as f64).powi(2)
    }

    /// Factor turning `g_hat(0)` into `int g dx`.
    pub fn mean_factor(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    /// Integer lattice index along each axis, in `[-n/2, n/2)`.
    pub fn mode_index(&self, flat: usize) -> [i64; 3] {
        let mut out = [0i64; 3];
        let mut rest = flat;
        let half = (self.n / 2) as i64;
        for axis in (0..self.dim).rev() {
            let j = (rest % self.n) as i64;
            rest /= self.n;
            out[axis] = if j < half { j } else { j - self.n as i64 };
        }
        out
    }

    /// Flat position of a lattice index (entries taken modulo `n`).
    pub fn flat_index(&self, idx: &[i64]) -> usize {
        let n = self.n as i64;
        idx[..self.dim]
            .iter()
            .fold(0usize, |acc, &m| acc * self.n + m.rem_euclid(n) as usize)
    }

    /// Flat position of `-k`.
    pub fn negated(&self, flat: usize) -> usize {
        let mut idx = self.mode_index(flat);
        for m in &mut idx {
            *m = -*m;
        }
        self.flat_index(&idx)
    }

    /// Physical wavevector `2 pi / L * m`.
    pub fn wavevector(&self, flat: usize) -> [f64; 3] {
        let m = self.mode_index(flat);
        let dk = self.dk();
        [m[0] as f64 * dk, m[1] as f64 * dk, m[2] as f64 * dk]
    }

    pub fn k_norm_sq(&self, flat: usize) -> f64 {
        self.wavevector(flat).iter().map(|k| k * k).sum()
    }

    /// Largest retained lattice index under the 2/3 rule.
    pub fn band_limit(&self) -> i64 {
        (self.n / 3) as i64
    }

    /// Whether every `|m_axis| <= n / 3`.
    pub fn in_band(&self, flat: usize) -> bool {
        let limit = self.band_limit();
        self.mode_index(flat)[..self.dim].iter().all(|m| m.abs() <= limit)
    }

    /// Flat indices of all retained modes.
    pub fn band_modes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.in_band(i)).collect()
    }

    /// Whether some axis sits on the Nyquist index `-n/2`.
    pub fn is_nyquist(&self, flat: usize) -> bool {
        let half = -((self.n / 2) as i64);
        self.mode_index(flat)[..self.dim].contains(&half)
    }

    /// Physical coordinates of grid point `flat`.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        let mut rest = flat;
        let h = self.length / self.n as f64;
        for axis in (0..self.dim).rev() {
            out[axis] = (rest % self.n) as f64 * h;
            rest /= self.n;
        }
        out
    }
}

/// FFT context for one grid. One instance per concurrent worker.
#[derive(Clone)]
pub struct Transformer {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Transformer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transformer").field("grid", &self.grid).finish()
    }
}

impl Transformer {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.n),
            inverse: planner.plan_fft_inverse(grid.n),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn run(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n;
        let total = data.len();
        let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
        let mut lines = vec![ZERO; total];
        for axis in 0..self.grid.dim {
            let stride = n.pow((self.grid.dim - 1 - axis) as u32);
            if stride == 1 {
                fft.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = n * stride;
            let mut line = 0;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    let dst = &mut lines[line * n..(line + 1) * n];
                    for (j, z) in dst.iter_mut().enumerate() {
                        *z = data[base + j * stride];
                    }
                    line += 1;
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            let mut line = 0;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    let src = &lines[line * n..(line + 1) * n];
                    for (j, z) in src.iter().enumerate() {
                        data[base + j * stride] = *z;
                    }
                    line += 1;
                }
            }
        }
    }

    /// In-place unnormalized forward transform.
    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.grid.len());
        self.run(data, &self.forward);
    }

    /// In-place inverse transform including the `1 / n^d` factor.
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.grid.len());
        self.run(data, &self.inverse);
        let s = 1.0 / self.grid.len() as f64;
        for z in data.iter_mut() {
            *z *= s;
        }
    }

    /// Forward transform of real physical samples.
    pub fn transform(&self, samples: &[f64]) -> Result<SpectralField> {
        if samples.len() != self.grid.len() {
            return Err(Error::SizeMismatch {
                expected: self.grid.len(),
                actual: samples.len(),
            });
        }
        let mut data: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward_in_place(&mut data);
        Ok(SpectralField {
            grid: self.grid,
            coeffs: data,
        })
    }

    /// Inverse transform; returns the real part of the physical samples.
    pub fn inverse_transform(&self, field: &SpectralField) -> Result<Vec<f64>> {
        Ok(self.inverse_complex(field)?.iter().map(|z| z.re).collect())
    }

    pub fn inverse_complex(&self, field: &SpectralField) -> Result<Vec<Complex64>> {
        self.check(field)?;
        let mut data = field.coeffs.clone();
        self.inverse_in_place(&mut data);
        Ok(data)
    }

    fn check(&self, field: &SpectralField) -> Result<()> {
        if field.grid != self.grid {
            return Err(Error::Grid("field and transformer grids differ".into()));
        }
        Ok(())
    }

    /// Pointwise product under the 2/3 rule: both inputs and the output are
    /// restricted to `|m_axis| <= n / 3`.
    pub fn dealiased_product(&self, f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
        self.check(f)?;
        self.check(g)?;
        let mut fp = f.band_limited().coeffs;
        let mut gp = g.band_limited().coeffs;
        self.inverse_in_place(&mut fp);
        self.inverse_in_place(&mut gp);
        for (a, b) in fp.iter_mut().zip(&gp) {
            *a *= b;
        }
        self.forward_in_place(&mut fp);
        let mut out = SpectralField {
            grid: self.grid,
            coeffs: fp,
        };
        out.truncate_band();
        Ok(out)
    }

    /// `||g||_{L^p}` on the physical grid (rectangle rule); `p = inf` gives the max.
    pub fn lebesgue_norm(&self, field: &SpectralField, p: f64) -> Result<f64> {
        let samples = self.inverse_complex(field)?;
        lebesgue_norm_samples(&self.grid, samples.iter().map(|z| z.norm()), p)
    }
}

/// `||g||_{L^p}` of physical sample magnitudes.
pub fn lebesgue_norm_samples(grid: &Grid, magnitudes: impl Iterator<Item = f64>, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!("Lebesgue exponent must be >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(magnitudes.fold(0.0, f64::max));
    }
    let sum: f64 = magnitudes.map(|x| x.powf(p)).sum();
    Ok((sum * grid.cell_volume()).powf(1.0 / p))
}

/// Scalar field stored by its Fourier coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            coeffs: vec![ZERO; grid.len()],
        }
    }

    pub fn from_coeffs(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                actual: coeffs.len(),
            });
        }
        Ok(Self { grid, coeffs })
    }

    /// Spectral coefficients of the constant field `value`.
    pub fn constant(grid: Grid, value: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.coeffs[0] = Complex64::new(value * grid.len() as f64, 0.0);
        f
    }

    /// The real field `amplitude * cos(k.x)` for lattice index `m` (or
    /// `amplitude * sin(k.x)` when `sine` is set).
    pub fn plane_wave(grid: Grid, m: &[i64], amplitude: f64, sine: bool) -> Self {
        let mut f = Self::zeros(grid);
        let p = grid.flat_index(m);
        let neg: Vec<i64> = m.iter().map(|x| -x).collect();
        let q = grid.flat_index(&neg);
        let half = 0.5 * amplitude * grid.len() as f64;
        let (zp, zq) = if sine {
            (Complex64::new(0.0, -half), Complex64::new(0.0, half))
        } else {
            (Complex64::new(half, 0.0), Complex64::new(half, 0.0))
        };
        f.coeffs[p] += zp;
        f.coeffs[q] += zq;
        f
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn map_modes(&self, mut mult: impl FnMut(usize, Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid,
            coeffs: self.coeffs.iter().enumerate().map(|(i, &z)| mult(i, z)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_modes(|_, z| z * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.map_modes(|i, z| z + other.coeffs[i])
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.map_modes(|i, z| z - other.coeffs[i])
    }

    /// `d / dx_axis`; the Nyquist mode of that axis is dropped.
    pub fn derivative(&self, axis: usize) -> Self {
        let g = self.grid;
        let nyq = -((g.n / 2) as i64);
        self.map_modes(|i, z| {
            if g.mode_index(i)[axis] == nyq {
                ZERO
            } else {
                z * Complex64::new(0.0, g.wavevector(i)[axis])
            }
        })
    }

    pub fn laplacian(&self) -> Self {
        let g = self.grid;
        self.map_modes(|i, z| z * -g.k_norm_sq(i))
    }

    /// Zeroes every mode outside the 2/3 band.
    pub fn truncate_band(&mut self) {
        let g = self.grid;
        for (i, z) in self.coeffs.iter_mut().enumerate() {
            if !g.in_band(i) {
                *z = ZERO;
            }
        }
    }

    pub fn band_limited(&self) -> Self {
        let mut f = self.clone();
        f.truncate_band();
        f
    }

    /// Projects onto Hermitian-symmetric coefficients (real physical data).
    pub fn symmetrize(&mut self) {
        let g = self.grid;
        let old = self.coeffs.clone();
        for (i, z) in self.coeffs.iter_mut().enumerate() {
            *z = 0.5 * (old[i] + old[g.negated(i)].conj());
        }
    }

    /// Largest violation of `g_hat(-k) = conj(g_hat(k))`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[i] - self.coeffs[self.grid.negated(i)].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// `int conj(self) other dx`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        let s: Complex64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.conj() * b)
            .sum();
        s * self.grid.parseval_factor()
    }

    /// `int g dx`.
    pub fn integral(&self) -> Complex64 {
        self.coeffs[0] * self.grid.mean_factor()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.weighted_norm_sq(|_| 1.0)
    }

    /// `(L^d / n^{2d}) sum_k w(k) |g_hat(k)|^2`.
    pub fn weighted_norm_sq(&self, weight: impl Fn(usize) -> f64) -> f64 {
        let s: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, z)| weight(i) * z.norm_sqr())
            .sum();
        s * self.grid.parseval_factor()
    }

    /// `sum_{|a| <= s} ||d^a g||^2`.
    pub fn sobolev_norm_sq(&self, s: usize) -> f64 {
        let g = self.grid;
        self.weighted_norm_sq(|i| sobolev_weight(&g.wavevector(i)[..g.dim], s))
    }

    /// Low/high frequency split by the radial cutoff of radius `r0`
    /// (physical wavenumber units). `low + high` reproduces `self`.
    pub fn freq_split(&self, r0: f64) -> (Self, Self) {
        let g = self.grid;
        let low = self.map_modes(|i, z| z * cutoff_low(g.k_norm_sq(i).sqrt(), r0));
        let high = self.map_modes(|i, z| z - low.coeffs[i]);
        (low, high)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// `phi_0(|k|)`: one on `[0, r0/2]`, a `cos^2` ramp on `(r0/2, r0)`, zero from `r0` on.
pub fn cutoff_low(kmag: f64, r0: f64) -> f64 {
    let half = 0.5 * r0;
    if kmag <= half {
        1.0
    } else if kmag >= r0 {
        0.0
    } else {
        let c = (0.5 * PI * (kmag - half) / half).cos();
        c * c
    }
}

/// `phi_1 = 1 - phi_0`.
pub fn cutoff_high(kmag: f64, r0: f64) -> f64 {
    1.0 - cutoff_low(kmag, r0)
}

/// `sum_{|a| <= s} prod_i k_i^{2 a_i}` over multi-indices `a`.
pub fn sobolev_weight(k: &[f64], s: usize) -> f64 {
    homogeneous_weights(k, s).iter().sum()
}

/// `[w_0, ..., w_s]` with `w_j = sum_{|a| = j} prod_i k_i^{2 a_i}`, i.e. the
/// Fourier weight of `sum_{|a| = j} ||d^a g||^2`.
pub fn homogeneous_weights(k: &[f64], s: usize) -> Vec<f64> {
    // Complete homogeneous symmetric polynomials in k_1^2, ..., k_d^2.
    let mut h = vec![0.0; s + 1];
    h[0] = 1.0;
    for &ki in k {
        let x = ki * ki;
        for j in 1..=s {
            h[j] += x * h[j - 1];
        }
    }
    h
}
