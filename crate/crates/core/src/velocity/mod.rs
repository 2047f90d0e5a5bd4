//! Velocity-space discretization.
//!
//! A distribution perturbation `f(v)` is expanded in the normalized Hermite
//! functions
//!
//! ```text
//! e_a(v) = He_a(v) sqrt(M(v)) / sqrt(a!),    M(v) = (2 pi)^(-d/2) exp(-|v|^2 / 2)
//! ```
//!
//! which are orthonormal in `L^2(R^d)` and diagonalize the linearized
//! Fokker-Planck operator: `L e_a = -|a| e_a`. Multiplication by `v_i` and
//! differentiation in `v_i` act as three-term ladders along axis `i`. The
//! hierarchy is closed by dropping every coupling into total degree `N + 1`.

mod quadrature;

pub use quadrature::{maxwellian, GaussHermite1d, PointwiseOracle, QuadratureRule};

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest supported Hermite degree.
pub const MAX_DEGREE: usize = 12;

/// Multi-index `(a_1, ..., a_d)` labelling a Hermite function.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    entries: [usize; 3],
    dim: usize,
}

impl MultiIndex {
    pub fn new(entries: &[usize]) -> Result<Self> {
        if entries.is_empty() || entries.len() > 3 {
            return Err(Error::InvalidArgument(format!(
                "multi-index must have 1 to 3 entries, got {}",
                entries.len()
            )));
        }
        let mut padded = [0; 3];
        padded[..entries.len()].copy_from_slice(entries);
        Ok(Self {
            entries: padded,
            dim: entries.len(),
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            entries: [0; 3],
            dim,
        }
    }

    /// Unit index along `axis` (zero based).
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut m = Self::zero(dim);
        m.entries[axis] = 1;
        m
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries[..self.dim]
    }

    pub fn get(&self, axis: usize) -> usize {
        self.entries[axis]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.entries().iter().sum()
    }

    fn shifted(&self, axis: usize, up: bool) -> Option<Self> {
        let mut m = *self;
        if up {
            m.entries[axis] += 1;
        } else {
            m.entries[axis] = m.entries[axis].checked_sub(1)?;
        }
        Some(m)
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.entries())
    }
}

/// The set of retained multi-indices `|a| <= N` together with the sparse
/// ladder tables used by every velocity operator.
#[derive(Clone, Debug)]
pub struct Truncation {
    dim: usize,
    max_degree: usize,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    /// `raise[axis][p]` is the position of `indices[p] + e_axis` if retained.
    raise: Vec<Vec<Option<usize>>>,
    /// `lower[axis][p]` is the position of `indices[p] - e_axis` if it exists.
    lower: Vec<Vec<Option<usize>>>,
}

/// Builds the graded enumeration of all multi-indices with `|a| <= max_degree`.
///
/// Within one degree the indices are sorted in descending lexicographic order,
/// so position 0 is the zero index and position `i` (`1 <= i <= d`) is `e_i`.
pub fn enumerate_truncation(dim: usize, max_degree: usize) -> Result<Arc<Truncation>> {
    Truncation::new(dim, max_degree).map(Arc::new)
}

impl Truncation {
    pub fn new(dim: usize, max_degree: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Truncation(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if !(2..=MAX_DEGREE).contains(&max_degree) {
            return Err(Error::Truncation(format!(
                "max degree must lie in 2..={MAX_DEGREE}, got {max_degree}"
            )));
        }
        let mut indices = Vec::new();
        for degree in 0..=max_degree {
            let mut level = Vec::new();
            collect_level(dim, degree, &mut [0; 3], 0, &mut level);
            level.sort_by_key(|a| std::cmp::Reverse(a.entries));
            indices.extend(level);
        }
        let lookup: HashMap<_, _> = indices.iter().enumerate().map(|(p, m)| (*m, p)).collect();
        let table = |up: bool| -> Vec<Vec<Option<usize>>> {
            (0..dim)
                .map(|axis| {
                    indices
                        .iter()
                        .map(|m| m.shifted(axis, up).and_then(|s| lookup.get(&s).copied()))
                        .collect()
                })
                .collect()
        };
        let raise = table(true);
        let lower = table(false);
        Ok(Self {
            dim,
            max_degree,
            indices,
            lookup,
            raise,
            lower,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn index(&self, p: usize) -> MultiIndex {
        self.indices[p]
    }

    pub fn position(&self, m: &MultiIndex) -> Option<usize> {
        self.lookup.get(m).copied()
    }

    /// Position of the index with the given entries; panics if not retained.
    pub fn pos(&self, entries: &[usize]) -> usize {
        let m = MultiIndex::new(entries).expect("valid multi-index");
        self.position(&m)
            .unwrap_or_else(|| panic!("index {entries:?} not in truncation"))
    }

    /// Position of `e_i + e_j` (the degree-two index probed by `Gamma_ij`).
    pub fn pair_position(&self, i: usize, j: usize) -> usize {
        let mut m = MultiIndex::zero(self.dim);
        m.entries[i] += 1;
        m.entries[j] += 1;
        self.lookup[&m]
    }

    pub fn raised(&self, axis: usize, p: usize) -> Option<usize> {
        self.raise[axis][p]
    }

    pub fn lowered(&self, axis: usize, p: usize) -> Option<usize> {
        self.lower[axis][p]
    }

    /// Eigenvalue of the Fokker-Planck operator on `e_p`.
    pub fn fokker_planck_eigenvalue(&self, p: usize) -> f64 {
        -(self.indices[p].degree() as f64)
    }

    /// `out = v_axis * c` on the retained band.
    pub fn mul_v_into(&self, axis: usize, c: &[Complex64], out: &mut [Complex64]) {
        for (p, m) in self.indices.iter().enumerate() {
            let n = m.get(axis) as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            if let Some(q) = self.raise[axis][p] {
                acc += c[q] * (n + 1.0).sqrt();
            }
            if let Some(q) = self.lower[axis][p] {
                acc += c[q] * n.sqrt();
            }
            out[p] = acc;
        }
    }

    /// `out = d/dv_axis c` on the retained band.
    pub fn diff_v_into(&self, axis: usize, c: &[Complex64], out: &mut [Complex64]) {
        for (p, m) in self.indices.iter().enumerate() {
            let n = m.get(axis) as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            if let Some(q) = self.raise[axis][p] {
                acc += c[q] * (0.5 * (n + 1.0).sqrt());
            }
            if let Some(q) = self.lower[axis][p] {
                acc -= c[q] * (0.5 * n.sqrt());
            }
            out[p] = acc;
        }
    }

    /// Dense real matrix of multiplication by `v_axis`.
    pub fn v_matrix(&self, axis: usize) -> DMatrix<f64> {
        self.ladder_matrix(axis, 1.0, 1.0)
    }

    /// Dense real matrix of `d/dv_axis`.
    pub fn dv_matrix(&self, axis: usize) -> DMatrix<f64> {
        self.ladder_matrix(axis, 0.5, -0.5)
    }

    fn ladder_matrix(&self, axis: usize, up: f64, down: f64) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for (p, idx) in self.indices.iter().enumerate() {
            let a = idx.get(axis) as f64;
            if let Some(q) = self.raise[axis][p] {
                m[(p, q)] = up * (a + 1.0).sqrt();
            }
            if let Some(q) = self.lower[axis][p] {
                m[(p, q)] = down * a.sqrt();
            }
        }
        m
    }

    /// Gram matrix `G` of the truncated nu-form: `|c|_nu^2 = c^* G c`.
    pub fn nu_form_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut g = DMatrix::identity(n, n);
        for axis in 0..self.dim {
            let d = self.dv_matrix(axis);
            let v = self.v_matrix(axis);
            g += d.transpose() * &d + v.transpose() * &v;
        }
        g
    }

    /// Truncated nu-norm squared of a raw coefficient slice.
    pub fn nu_norm_sq_slice(&self, c: &[Complex64], scratch: &mut Vec<Complex64>) -> f64 {
        scratch.resize(c.len(), Complex64::new(0.0, 0.0));
        let mut total: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        for axis in 0..self.dim {
            self.diff_v_into(axis, c, scratch);
            total += scratch.iter().map(|z| z.norm_sqr()).sum::<f64>();
            self.mul_v_into(axis, c, scratch);
            total += scratch.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        total
    }

    /// Velocity derivatives `d_v^beta c` grouped by order: entry `m` lists one
    /// vector per multi-index `|beta| = m`, for `m <= max_order`.
    pub fn derivative_family(&self, c: &[Complex64], max_order: usize) -> Vec<Vec<Vec<Complex64>>> {
        // Each multi-index is reached once by only differentiating along axes
        // no smaller than the last one applied.
        let mut levels: Vec<Vec<(usize, Vec<Complex64>)>> = vec![vec![(0, c.to_vec())]];
        for _ in 0..max_order {
            let prev = levels.last().expect("nonempty");
            let mut next = Vec::new();
            for (last_axis, v) in prev {
                for axis in *last_axis..self.dim {
                    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
                    self.diff_v_into(axis, v, &mut out);
                    next.push((axis, out));
                }
            }
            levels.push(next);
        }
        levels
            .into_iter()
            .map(|lvl| lvl.into_iter().map(|(_, v)| v).collect())
            .collect()
    }

    /// `Gamma_ij` of a raw coefficient slice.
    pub fn gamma_slice(&self, c: &[Complex64], i: usize, j: usize) -> Complex64 {
        let p = self.pair_position(i, j);
        if i == j {
            c[p] * std::f64::consts::SQRT_2
        } else {
            c[p]
        }
    }
}

fn collect_level(dim: usize, remaining: usize, cur: &mut [usize; 3], axis: usize, out: &mut Vec<MultiIndex>) {
    if axis + 1 == dim {
        cur[axis] = remaining;
        out.push(MultiIndex {
            entries: *cur,
            dim,
        });
        cur[axis] = 0;
        return;
    }
    for k in 0..=remaining {
        cur[axis] = k;
        collect_level(dim, remaining - k, cur, axis + 1, out);
    }
    cur[axis] = 0;
}

/// Coefficients of a velocity function in the Hermite basis.
#[derive(Clone, Debug)]
pub struct VelocityCoeffs {
    trunc: Arc<Truncation>,
    values: Vec<Complex64>,
}

impl VelocityCoeffs {
    pub fn zeros(trunc: &Arc<Truncation>) -> Self {
        Self {
            trunc: Arc::clone(trunc),
            values: vec![Complex64::new(0.0, 0.0); trunc.len()],
        }
    }

    /// The basis function `e_a` for the given entries.
    pub fn basis(trunc: &Arc<Truncation>, entries: &[usize]) -> Self {
        let mut c = Self::zeros(trunc);
        c.values[trunc.pos(entries)] = Complex64::new(1.0, 0.0);
        c
    }

    pub fn from_values(trunc: &Arc<Truncation>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != trunc.len() {
            return Err(Error::SizeMismatch {
                expected: trunc.len(),
                actual: values.len(),
            });
        }
        Ok(Self {
            trunc: Arc::clone(trunc),
            values,
        })
    }

    pub fn from_real(trunc: &Arc<Truncation>, values: &[f64]) -> Result<Self> {
        Self::from_values(trunc, values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn trunc(&self) -> &Arc<Truncation> {
        &self.trunc
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn get(&self, entries: &[usize]) -> Complex64 {
        self.values[self.trunc.pos(entries)]
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            trunc: Arc::clone(&self.trunc),
            values: self.values.iter().map(|z| z * s).collect(),
        }
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `<self, other>` with the conjugate on `other`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    /// Largest `|max difference|` between two coefficient vectors.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Highest degree carrying a nonzero coefficient (0 for the zero vector).
    pub fn effective_degree(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > 0.0)
            .map(|(p, _)| self.trunc.index(p).degree())
            .max()
            .unwrap_or(0)
    }

    fn map_into(&self, op: impl Fn(&Truncation, &[Complex64], &mut [Complex64])) -> Self {
        let mut out = Self::zeros(&self.trunc);
        op(&self.trunc, &self.values, &mut out.values);
        out
    }
}

/// Coefficients of `L f`; the operator is diagonal with eigenvalue `-|a|`.
pub fn apply_fokker_planck(c: &VelocityCoeffs) -> VelocityCoeffs {
    c.map_into(|t, src, dst| {
        for (p, (d, s)) in dst.iter_mut().zip(src).enumerate() {
            *d = s * t.fokker_planck_eigenvalue(p);
        }
    })
}

/// Coefficients of `v_axis f` under the zero-flux closure (`axis` zero based).
pub fn multiply_by_v(c: &VelocityCoeffs, axis: usize) -> VelocityCoeffs {
    c.map_into(|t, src, dst| t.mul_v_into(axis, src, dst))
}

/// Coefficients of `d f / d v_axis` under the zero-flux closure.
pub fn differentiate_v(c: &VelocityCoeffs, axis: usize) -> VelocityCoeffs {
    c.map_into(|t, src, dst| t.diff_v_into(axis, src, dst))
}

/// Macro moments and micro remainder of `f`.
#[derive(Clone, Debug)]
pub struct MacroMicro {
    /// `a = <sqrt(M), f>`.
    pub a: Complex64,
    /// `b_i = <v_i sqrt(M), f>`.
    pub b: Vec<Complex64>,
    /// `{I - P} f`.
    pub micro: VelocityCoeffs,
}

impl MacroMicro {
    /// Coefficients of the macro part `P f = a sqrt(M) + b . v sqrt(M)`.
    pub fn macro_part(&self) -> VelocityCoeffs {
        let mut m = VelocityCoeffs::zeros(self.micro.trunc());
        m.values[0] = self.a;
        m.values[1..=self.b.len()].copy_from_slice(&self.b);
        m
    }
}

pub fn macro_micro_split(c: &VelocityCoeffs) -> MacroMicro {
    let d = c.trunc.dim();
    let mut micro = c.clone();
    for z in &mut micro.values[..=d] {
        *z = Complex64::new(0.0, 0.0);
    }
    MacroMicro {
        a: c.values[0],
        b: c.values[1..=d].to_vec(),
        micro,
    }
}

/// `Gamma_ij(f) = <(v_i v_j - delta_ij) sqrt(M), f>`, read off the degree-two
/// coefficients (`i`, `j` zero based).
pub fn gamma_moment(c: &VelocityCoeffs, i: usize, j: usize) -> Complex64 {
    c.trunc.gamma_slice(&c.values, i, j)
}

/// `int |grad_v f|^2 + (1 + |v|^2) |f|^2 dv` within the truncated space.
pub fn nu_norm_sq(c: &VelocityCoeffs) -> f64 {
    let mut scratch = Vec::new();
    c.trunc.nu_norm_sq_slice(&c.values, &mut scratch)
}

/// Smallest generalized eigenvalue of `<-L f, f>` against the truncated
/// nu-form on the span of `{e_a : a != 0}`.
pub fn coercivity_constant(trunc: &Truncation) -> Result<f64> {
    let g = trunc.nu_form_matrix();
    let n = trunc.len() - 1;
    let g_sub = g.view((1, 1), (n, n)).into_owned();
    let chol = g_sub
        .cholesky()
        .ok_or_else(|| Error::Eigen("nu-form is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .try_inverse()
        .ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;
    let lambda = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -trunc.fokker_planck_eigenvalue(i + 1)
        } else {
            0.0
        }
    });
    let reduced = &l_inv * lambda * l_inv.transpose();
    let sym = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn trunc(d: usize, n: usize) -> Arc<Truncation> {
        enumerate_truncation(d, n).unwrap()
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(trunc(1, 2).len(), 3);
        assert_eq!(trunc(3, 2).len(), 10);
        assert_eq!(trunc(3, 4).len(), 35);
        assert_eq!(trunc(2, 6).len(), 28);
        let t = trunc(1, 2);
        let ents: Vec<_> = t.indices().iter().map(|m| m.entries().to_vec()).collect();
        assert_eq!(ents, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn enumeration_layout() {
        let t = trunc(3, 4);
        assert_eq!(t.index(0).degree(), 0);
        for i in 0..3 {
            assert_eq!(t.index(i + 1), MultiIndex::unit(3, i));
        }
        let degrees: Vec<_> = t.indices().iter().map(|m| m.degree()).collect();
        assert!(degrees.windows(2).all(|w| w[0] <= w[1]));
        let again = trunc(3, 4);
        assert_eq!(t.indices(), again.indices());
    }

    #[test]
    fn enumeration_rejects_bad_input() {
        assert!(enumerate_truncation(0, 4).is_err());
        assert!(enumerate_truncation(4, 4).is_err());
        assert!(enumerate_truncation(3, 1).is_err());
    }

    #[test]
    fn fokker_planck_eigenvalues() {
        let t = trunc(3, 4);
        let zero = apply_fokker_planck(&VelocityCoeffs::basis(&t, &[0, 0, 0]));
        assert_eq!(zero.l2_norm_sq(), 0.0);
        let c = VelocityCoeffs::basis(&t, &[2, 1, 0]);
        let lc = apply_fokker_planck(&c);
        assert_abs_diff_eq!(lc.max_abs_diff(&c.scale(-3.0)), 0.0);
    }

    #[test]
    fn ladder_examples_1d() {
        let t = trunc(1, 4);
        let v0 = multiply_by_v(&VelocityCoeffs::basis(&t, &[0]), 0);
        assert_abs_diff_eq!(v0.max_abs_diff(&VelocityCoeffs::basis(&t, &[1])), 0.0);
        let v1 = multiply_by_v(&VelocityCoeffs::basis(&t, &[1]), 0);
        assert_abs_diff_eq!(v1.get(&[0]).re, 1.0);
        assert_abs_diff_eq!(v1.get(&[2]).re, 2f64.sqrt());
        let top = multiply_by_v(&VelocityCoeffs::basis(&t, &[4]), 0);
        assert_abs_diff_eq!(top.get(&[3]).re, 2.0);
        assert_abs_diff_eq!(top.l2_norm_sq(), 4.0);

        let d0 = differentiate_v(&VelocityCoeffs::basis(&t, &[0]), 0);
        assert_abs_diff_eq!(d0.get(&[1]).re, -0.5);
        let d1 = differentiate_v(&VelocityCoeffs::basis(&t, &[1]), 0);
        assert_abs_diff_eq!(d1.get(&[0]).re, 0.5);
        assert_abs_diff_eq!(d1.get(&[2]).re, -(2f64.sqrt()) / 2.0);
    }

    #[test]
    fn macro_micro_examples() {
        let t = trunc(3, 4);
        let s = macro_micro_split(&VelocityCoeffs::basis(&t, &[0, 0, 0]));
        assert_eq!(s.a.re, 1.0);
        assert_eq!(s.micro.l2_norm_sq(), 0.0);
        let s = macro_micro_split(&VelocityCoeffs::basis(&t, &[0, 1, 0]));
        assert_eq!(s.a.re, 0.0);
        assert_eq!(s.b[1].re, 1.0);
        assert_eq!(s.micro.l2_norm_sq(), 0.0);
        let c = VelocityCoeffs::basis(&t, &[2, 0, 0]);
        let s = macro_micro_split(&c);
        assert_eq!(s.micro.max_abs_diff(&c), 0.0);
    }

    #[test]
    fn gamma_examples() {
        let t = trunc(3, 4);
        let e0 = VelocityCoeffs::basis(&t, &[0, 0, 0]);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(gamma_moment(&e0, i, j).norm(), 0.0);
            }
        }
        let c = VelocityCoeffs::basis(&t, &[2, 0, 0]);
        assert_abs_diff_eq!(gamma_moment(&c, 0, 0).re, 2f64.sqrt(), epsilon = 1e-15);
        let c = VelocityCoeffs::basis(&t, &[1, 1, 0]);
        assert_abs_diff_eq!(gamma_moment(&c, 0, 1).re, 1.0);
        assert_abs_diff_eq!(gamma_moment(&c, 1, 0).re, 1.0);
    }

    #[test]
    fn nu_norm_examples() {
        let t = trunc(1, 4);
        assert_eq!(nu_norm_sq(&VelocityCoeffs::zeros(&t)), 0.0);
        let e0 = VelocityCoeffs::basis(&t, &[0]);
        assert_abs_diff_eq!(nu_norm_sq(&e0), 9.0 / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(nu_norm_sq(&e0.scale(2.0)), 9.0, epsilon = 1e-14);
    }

    #[test]
    fn kernel_identity() {
        // L P f = -P_1 f
        let t = trunc(3, 4);
        let vals: Vec<f64> = (0..t.len()).map(|p| (p as f64 * 0.37).sin()).collect();
        let c = VelocityCoeffs::from_real(&t, &vals).unwrap();
        let pf = macro_micro_split(&c).macro_part();
        let lpf = apply_fokker_planck(&pf);
        let mut p1 = pf.clone();
        p1.values_mut()[0] = Complex64::new(0.0, 0.0);
        assert_eq!(lpf.max_abs_diff(&p1.scale(-1.0)), 0.0);
    }

    #[test]
    fn coercivity_is_positive() {
        for d in 1..=3 {
            for n in 2..=6 {
                let lam = coercivity_constant(&trunc(d, n)).unwrap();
                assert!(lam > 0.0, "d={d} N={n} lambda0={lam}");
            }
        }
    }
}
