//! Gauss-Hermite quadrature against the normalized Maxwellian, and a
//! pointwise evaluation path for the velocity operators that does not use the
//! ladder tables. Used as an independent reference for the spectral operators.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::{Truncation, VelocityCoeffs};
use crate::error::{Error, Result};

/// One-dimensional Gauss rule for the standard normal weight.
#[derive(Clone, Debug)]
pub struct GaussHermite1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite1d {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        // Golub-Welsch start, then Newton polish on the orthonormal recurrence.
        let jacobi = DMatrix::from_fn(order, order, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        });
        let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut weights = Vec::with_capacity(order);
        for x in &mut nodes {
            for _ in 0..4 {
                let (psi_n, psi_nm1, _) = orthonormal_hermite(order, *x);
                let step = psi_n / ((order as f64).sqrt() * psi_nm1);
                *x -= step;
                if step.abs() < 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            let (_, _, christoffel) = orthonormal_hermite(order, *x);
            weights.push(1.0 / christoffel);
        }
        Self { nodes, weights }
    }
}

/// Returns `(psi_n(x), psi_{n-1}(x), sum_{k<n} psi_k(x)^2)` for the
/// orthonormal probabilists' Hermite polynomials.
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sum = 0.0;
    for k in 0..n {
        sum += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev, sum)
}

/// Tensor-product Gauss-Hermite rule in `R^d`; the weights integrate against
/// the normalized Maxwellian and sum to one.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    dim: usize,
    order: usize,
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(dim: usize, order: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!("quadrature dimension {dim}")));
        }
        if order == 0 {
            return Err(Error::InvalidArgument("quadrature order must be positive".into()));
        }
        let rule = GaussHermite1d::new(order);
        let total = order.pow(dim as u32);
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for flat in 0..total {
            let mut node = [0.0; 3];
            let mut w = 1.0;
            let mut rest = flat;
            for axis in (0..dim).rev() {
                let i = rest % order;
                rest /= order;
                node[axis] = rule.nodes[i];
                w *= rule.weights[i];
            }
            nodes.push(node);
            weights.push(w);
        }
        Ok(Self {
            dim,
            order,
            nodes,
            weights,
        })
    }

    /// Default oracle rule for a truncation: `N + 4` nodes per axis.
    pub fn for_truncation(trunc: &Truncation) -> Self {
        Self::new(trunc.dim(), trunc.max_degree() + 4).expect("valid truncation")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `int g(v) M(v) dv`.
    pub fn integrate(&self, g: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * g(&v[..self.dim]))
            .sum()
    }
}

/// Normalized Maxwellian in `d` dimensions.
pub fn maxwellian(v: &[f64]) -> f64 {
    let r2: f64 = v.iter().map(|x| x * x).sum();
    (2.0 * PI).powf(-(v.len() as f64) / 2.0) * (-0.5 * r2).exp()
}

/// One-dimensional Hermite functions and their first two derivatives,
/// evaluated from the explicit polynomial formulas.
fn hermite_functions(max_n: usize, x: f64) -> [Vec<f64>; 3] {
    // He_n, He_n', He_n'' by the three-term recurrence.
    let mut he = vec![0.0; max_n + 1];
    he[0] = 1.0;
    if max_n >= 1 {
        he[1] = x;
    }
    for n in 1..max_n {
        he[n + 1] = x * he[n] - n as f64 * he[n - 1];
    }
    let d1: Vec<f64> = (0..=max_n).map(|n| if n == 0 { 0.0 } else { n as f64 * he[n - 1] }).collect();
    let d2: Vec<f64> = (0..=max_n)
        .map(|n| if n < 2 { 0.0 } else { (n * (n - 1)) as f64 * he[n - 2] })
        .collect();
    let s = (2.0 * PI).powf(-0.25) * (-0.25 * x * x).exp();
    let mut fact = 1.0;
    let mut e = vec![0.0; max_n + 1];
    let mut de = vec![0.0; max_n + 1];
    let mut dde = vec![0.0; max_n + 1];
    for n in 0..=max_n {
        if n > 0 {
            fact *= n as f64;
        }
        let norm = s / fact.sqrt();
        e[n] = he[n] * norm;
        de[n] = (d1[n] - 0.5 * x * he[n]) * norm;
        dde[n] = (d2[n] - x * d1[n] + (0.25 * x * x - 0.5) * he[n]) * norm;
    }
    [e, de, dde]
}

/// Pointwise evaluation of `f`, `grad_v f` and `Delta_v f` on a quadrature rule.
#[derive(Clone, Debug)]
pub struct PointwiseOracle {
    rule: QuadratureRule,
    max_degree: usize,
    /// `tables[node][axis][kind][n]` with kind 0 = e, 1 = e', 2 = e''.
    tables: Vec<Vec<[Vec<f64>; 3]>>,
    /// Node-major values of the truncation's basis functions, their
    /// gradients (`node, axis, p`) and Laplacians.
    cached_degree: usize,
    values: Vec<f64>,
    grads: Vec<f64>,
    laplacians: Vec<f64>,
}

/// Values of a velocity function and its derivatives at every node.
#[derive(Clone, Debug)]
pub struct NodeSamples {
    pub f: Vec<Complex64>,
    pub grad: Vec<[Complex64; 3]>,
    pub laplacian: Vec<Complex64>,
}

impl PointwiseOracle {
    /// Requires `rule.order() >= N + 2` so every projection used below is exact.
    pub fn new(rule: QuadratureRule, trunc: &Truncation) -> Result<Self> {
        let required = trunc.max_degree() + 2;
        if rule.order() < required {
            return Err(Error::QuadratureOrder {
                order: rule.order(),
                degree: trunc.max_degree(),
                required,
            });
        }
        if rule.dim() != trunc.dim() {
            return Err(Error::InvalidArgument("rule and truncation dimensions differ".into()));
        }
        // One extra degree so derivatives of the top mode are representable.
        let max_degree = trunc.max_degree() + 1;
        let tables: Vec<Vec<[Vec<f64>; 3]>> = rule
            .nodes()
            .iter()
            .map(|v| (0..rule.dim()).map(|a| hermite_functions(max_degree, v[a])).collect())
            .collect();
        let dim = rule.dim();
        let len = trunc.len();
        let n_nodes = rule.len();
        let mut values = vec![0.0; n_nodes * len];
        let mut grads = vec![0.0; n_nodes * dim * len];
        let mut laplacians = vec![0.0; n_nodes * len];
        for (node, tab) in tables.iter().enumerate() {
            for (p, m) in trunc.indices().iter().enumerate() {
                let e: Vec<f64> = (0..dim).map(|a| tab[a][0][m.get(a)]).collect();
                values[node * len + p] = e.iter().product();
                for axis in 0..dim {
                    let others: f64 = (0..dim).filter(|&b| b != axis).map(|b| e[b]).product();
                    grads[(node * dim + axis) * len + p] = tab[axis][1][m.get(axis)] * others;
                    laplacians[node * len + p] += tab[axis][2][m.get(axis)] * others;
                }
            }
        }
        Ok(Self {
            rule,
            max_degree,
            tables,
            cached_degree: trunc.max_degree(),
            values,
            grads,
            laplacians,
        })
    }

    fn cached(&self, trunc: &Truncation) -> bool {
        trunc.dim() == self.rule.dim() && trunc.max_degree() == self.cached_degree
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// `e_a(v)` at node `i` for arbitrary entries up to degree `N + 1` per axis.
    pub fn basis_value(&self, node: usize, entries: &[usize]) -> f64 {
        entries
            .iter()
            .enumerate()
            .map(|(axis, &n)| {
                assert!(n <= self.max_degree);
                self.tables[node][axis][0][n]
            })
            .product()
    }

    /// Samples of `f`, its gradient and Laplacian at every node.
    pub fn sample(&self, c: &VelocityCoeffs) -> NodeSamples {
        let dim = self.rule.dim();
        let trunc = c.trunc();
        let n_nodes = self.rule.len();
        let mut out = NodeSamples {
            f: vec![Complex64::new(0.0, 0.0); n_nodes],
            grad: vec![[Complex64::new(0.0, 0.0); 3]; n_nodes],
            laplacian: vec![Complex64::new(0.0, 0.0); n_nodes],
        };
        if self.cached(trunc) {
            let len = trunc.len();
            let c = c.values();
            let dot = |row: &[f64]| -> Complex64 { row.iter().zip(c).map(|(b, z)| z * b).sum() };
            for node in 0..n_nodes {
                out.f[node] = dot(&self.values[node * len..(node + 1) * len]);
                out.laplacian[node] = dot(&self.laplacians[node * len..(node + 1) * len]);
                for axis in 0..dim {
                    let at = (node * dim + axis) * len;
                    out.grad[node][axis] = dot(&self.grads[at..at + len]);
                }
            }
            return out;
        }
        for (node, tab) in self.tables.iter().enumerate() {
            for (p, m) in trunc.indices().iter().enumerate() {
                let coef = c.values()[p];
                if coef == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let e: Vec<f64> = (0..dim).map(|a| tab[a][0][m.get(a)]).collect();
                let value: f64 = e.iter().product();
                out.f[node] += coef * value;
                for axis in 0..dim {
                    let others: f64 = (0..dim).filter(|&b| b != axis).map(|b| e[b]).product();
                    out.grad[node][axis] += coef * (tab[axis][1][m.get(axis)] * others);
                    out.laplacian[node] += coef * (tab[axis][2][m.get(axis)] * others);
                }
            }
        }
        out
    }

    /// Values of `f` at the nodes.
    pub fn evaluate(&self, c: &VelocityCoeffs) -> Vec<Complex64> {
        self.sample(c).f
    }

    /// Projects node values of a function onto the truncated basis:
    /// `c_b = int g e_b dv`.
    pub fn project(&self, samples: &[Complex64], trunc: &std::sync::Arc<Truncation>) -> Result<VelocityCoeffs> {
        if samples.len() != self.rule.len() {
            return Err(Error::SizeMismatch {
                expected: self.rule.len(),
                actual: samples.len(),
            });
        }
        let dim = self.rule.dim();
        let mut out = VelocityCoeffs::zeros(trunc);
        let fast = self.cached(trunc);
        let len = trunc.len();
        for (node, (v, w)) in self.rule.nodes().iter().zip(self.rule.weights()).enumerate() {
            let m = maxwellian(&v[..dim]);
            let g = samples[node] * (w / m);
            if fast {
                let row = &self.values[node * len..(node + 1) * len];
                for (o, b) in out.values_mut().iter_mut().zip(row) {
                    *o += g * b;
                }
                continue;
            }
            for (p, idx) in trunc.indices().iter().enumerate() {
                out.values_mut()[p] += g * self.basis_value(node, idx.entries());
            }
        }
        Ok(out)
    }

    /// `<e_a, e_b>` by quadrature.
    pub fn inner_basis(&self, a: &[usize], b: &[usize]) -> f64 {
        let dim = self.rule.dim();
        (0..self.rule.len())
            .map(|node| {
                let m = maxwellian(&self.rule.nodes()[node][..dim]);
                self.rule.weights()[node] * self.basis_value(node, a) * self.basis_value(node, b) / m
            })
            .sum()
    }

    /// `L f` via `Delta_v f - |v|^2/4 f + d/2 f`, projected back.
    pub fn fokker_planck(&self, c: &VelocityCoeffs) -> Result<VelocityCoeffs> {
        let dim = self.rule.dim();
        let s = self.sample(c);
        let vals: Vec<Complex64> = (0..self.rule.len())
            .map(|i| {
                let v = &self.rule.nodes()[i][..dim];
                let r2: f64 = v.iter().map(|x| x * x).sum();
                s.laplacian[i] - s.f[i] * (0.25 * r2) + s.f[i] * (0.5 * dim as f64)
            })
            .collect();
        self.project(&vals, c.trunc())
    }

    /// `v_axis f`, projected back (the projection discards degree `N + 1`).
    pub fn multiply_by_v(&self, c: &VelocityCoeffs, axis: usize) -> Result<VelocityCoeffs> {
        let f = self.evaluate(c);
        let vals: Vec<Complex64> = f
            .iter()
            .zip(self.rule.nodes())
            .map(|(z, v)| z * v[axis])
            .collect();
        self.project(&vals, c.trunc())
    }

    /// `d f / d v_axis`, projected back.
    pub fn differentiate_v(&self, c: &VelocityCoeffs, axis: usize) -> Result<VelocityCoeffs> {
        let s = self.sample(c);
        let vals: Vec<Complex64> = s.grad.iter().map(|g| g[axis]).collect();
        self.project(&vals, c.trunc())
    }

    /// `(a, b)` moments by quadrature.
    pub fn moments(&self, c: &VelocityCoeffs) -> (Complex64, Vec<Complex64>) {
        let dim = self.rule.dim();
        let f = self.evaluate(c);
        let mut a = Complex64::new(0.0, 0.0);
        let mut b = vec![Complex64::new(0.0, 0.0); dim];
        for (i, (v, w)) in self.rule.nodes().iter().zip(self.rule.weights()).enumerate() {
            let m = maxwellian(&v[..dim]);
            let g = f[i] * (w / m.sqrt());
            a += g;
            for axis in 0..dim {
                b[axis] += g * v[axis];
            }
        }
        (a, b)
    }

    /// `int (v_i v_j - delta_ij) sqrt(M) f dv` by quadrature.
    pub fn gamma_moment(&self, c: &VelocityCoeffs, i: usize, j: usize) -> Complex64 {
        let dim = self.rule.dim();
        let f = self.evaluate(c);
        let delta = if i == j { 1.0 } else { 0.0 };
        self.rule
            .nodes()
            .iter()
            .zip(self.rule.weights())
            .zip(&f)
            .map(|((v, w), z)| z * (w * (v[i] * v[j] - delta) / maxwellian(&v[..dim]).sqrt()))
            .sum()
    }

    /// `int |grad_v f|^2 + (1 + |v|^2) |f|^2 dv` by quadrature.
    pub fn nu_norm_sq(&self, c: &VelocityCoeffs) -> f64 {
        let dim = self.rule.dim();
        let s = self.sample(c);
        (0..self.rule.len())
            .map(|i| {
                let v = &self.rule.nodes()[i][..dim];
                let r2: f64 = v.iter().map(|x| x * x).sum();
                let grad: f64 = s.grad[i][..dim].iter().map(|z| z.norm_sqr()).sum();
                self.rule.weights()[i] * (grad + (1.0 + r2) * s.f[i].norm_sqr()) / maxwellian(v)
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::velocity::enumerate_truncation;
    use approx::assert_abs_diff_eq;

    #[test]
    fn one_dimensional_rule_moments() {
        let r = GaussHermite1d::new(10);
        let sum: f64 = r.weights.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-14);
        // E[x^2] = 1, E[x^4] = 3, E[x^18] = 17!!
        let m = |p: i32| -> f64 { r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(p)).sum() };
        assert_abs_diff_eq!(m(2), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(m(4), 3.0, epsilon = 1e-12);
        let dfact: f64 = (1..=17).step_by(2).map(|k| k as f64).product();
        assert!((m(18) - dfact).abs() / dfact < 1e-12);
    }

    #[test]
    fn tensor_rule_normalized() {
        let r = QuadratureRule::new(3, 7).unwrap();
        assert_eq!(r.len(), 343);
        assert_abs_diff_eq!(r.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn orthonormality_by_quadrature() {
        let t = enumerate_truncation(2, 5).unwrap();
        let o = PointwiseOracle::new(QuadratureRule::new(2, 9).unwrap(), &t).unwrap();
        for a in t.indices() {
            for b in t.indices() {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(o.inner_basis(a.entries(), b.entries()), expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn refuses_low_order() {
        let t = enumerate_truncation(1, 6).unwrap();
        let err = PointwiseOracle::new(QuadratureRule::new(1, 7).unwrap(), &t).unwrap_err();
        assert!(matches!(err, Error::QuadratureOrder { required: 8, .. }));
    }
}
