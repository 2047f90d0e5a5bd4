//! Dense complex linear algebra: matrix exponential by scaling and squaring
//! with Padé approximants, exponential-integrator `phi` functions, spectra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Backward-error bounds for the [m/m] approximants in the 1-norm.
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539_398_330_063_23e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068e0;
const THETA13: f64 = 5.371920351148152e0;

pub fn one_norm(a: &CMatrix) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scaled_identity(n: usize, s: f64) -> CMatrix {
    CMatrix::from_diagonal_element(n, n, Complex64::new(s, 0.0))
}

fn solve_pade(u: CMatrix, v: CMatrix) -> CMatrix {
    let p = &v + &u;
    let q = v - u;
    q.lu().solve(&p).expect("Padé denominator is nonsingular within its bound")
}

fn pade_low(a: &CMatrix, b: &[f64]) -> CMatrix {
    let n = a.nrows();
    let a2 = a * a;
    let mut u = scaled_identity(n, b[1]);
    let mut v = scaled_identity(n, b[0]);
    let mut power = a2.clone();
    for j in (2..b.len()).step_by(2) {
        v += &power * Complex64::new(b[j], 0.0);
        if j + 1 < b.len() {
            u += &power * Complex64::new(b[j + 1], 0.0);
        }
        power = &power * &a2;
    }
    let u = a * u;
    solve_pade(u, v)
}

fn pade13(a: &CMatrix) -> CMatrix {
    let b = PADE13.map(|x| Complex64::new(x, 0.0));
    let n = a.nrows();
    let id = CMatrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    solve_pade(u, v)
}

/// `exp(A)` by scaling and squaring.
pub fn expm(a: &CMatrix) -> CMatrix {
    assert!(a.is_square(), "expm needs a square matrix");
    let norm = one_norm(a);
    if !norm.is_finite() {
        return CMatrix::from_element(a.nrows(), a.ncols(), Complex64::new(f64::NAN, f64::NAN));
    }
    if norm <= THETA3 {
        return pade_low(a, &PADE3);
    }
    if norm <= THETA5 {
        return pade_low(a, &PADE5);
    }
    if norm <= THETA7 {
        return pade_low(a, &PADE7);
    }
    if norm <= THETA9 {
        return pade_low(a, &PADE9);
    }
    let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
    let scaled = a * Complex64::new(2f64.powi(-s), 0.0);
    let mut r = pade13(&scaled);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// `exp(hA)`, `phi_1(hA)` and `phi_2(hA)` with
/// `phi_1(z) = (e^z - 1) / z` and `phi_2(z) = (e^z - 1 - z) / z^2`,
/// read off the exponential of the block matrix
/// `[[hA, I, 0], [0, 0, I], [0, 0, 0]]`. No inverse of `hA` is formed.
pub fn phi_functions(a: &CMatrix, h: f64) -> (CMatrix, CMatrix, CMatrix) {
    let n = a.nrows();
    let mut w = CMatrix::zeros(3 * n, 3 * n);
    w.view_mut((0, 0), (n, n)).copy_from(&(a * Complex64::new(h, 0.0)));
    for i in 0..n {
        w[(i, n + i)] = Complex64::new(1.0, 0.0);
        w[(n + i, 2 * n + i)] = Complex64::new(1.0, 0.0);
    }
    let e = expm(&w);
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, n)).into_owned(),
        e.view((0, 2 * n), (n, n)).into_owned(),
    )
}

/// All eigenvalues of a square complex matrix (complex Schur form).
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<Complex64>> {
    let scale = one_norm(a);
    if scale == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); a.nrows()]);
    }
    let unit = a * Complex64::new(1.0 / scale, 0.0);
    // The shifted QR occasionally stalls at one threshold and not at a looser one.
    let schur = [f64::EPSILON, 1e-14, 1e-13, 1e-12]
        .iter()
        .find_map(|&eps| nalgebra::linalg::Schur::try_new(unit.clone(), eps, 100_000))
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    let ev = schur
        .eigenvalues()
        .ok_or_else(|| Error::Eigen("eigenvalues not available".into()))?;
    Ok(ev.iter().map(|z| z * scale).collect())
}

/// Number of singular values below `rel_tol * sigma_max` (dimension of the kernel).
pub fn kernel_dimension(a: &CMatrix, rel_tol: f64) -> usize {
    let sv = a.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s <= rel_tol * smax).count()
}

/// Max-entry distance between two matrices.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn expm_of_diagonal() {
        let a = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(-1.0), c(2.5), c(-30.0)]));
        let e = expm(&a);
        assert!((e[(0, 0)].re - (-1f64).exp()).abs() < 1e-15);
        assert!((e[(1, 1)].re - 2.5f64.exp()).abs() < 1e-13 * 2.5f64.exp());
        assert!((e[(2, 2)].re - (-30f64).exp()).abs() < 1e-25);
        assert!(e[(0, 1)].norm() == 0.0);
    }

    #[test]
    fn expm_of_rotation_generator() {
        for &t in &[1e-3, 0.2, 1.0, 3.0, 40.0] {
            let a = CMatrix::from_row_slice(2, 2, &[c(0.0), c(t), c(-t), c(0.0)]);
            let e = expm(&a);
            assert!((e[(0, 0)].re - t.cos()).abs() < 1e-13);
            assert!((e[(0, 1)].re - t.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn expm_nilpotent() {
        let a = CMatrix::from_row_slice(2, 2, &[c(0.0), c(5.0), c(0.0), c(0.0)]);
        let e = expm(&a);
        assert!((e[(0, 1)].re - 5.0).abs() < 1e-14);
    }

    #[test]
    fn phi_functions_scalar() {
        for &z in &[-50.0, -1.0, -1e-6, 0.0, 1e-9, 0.7] {
            let a = CMatrix::from_element(1, 1, c(z));
            let (e, p1, p2) = phi_functions(&a, 1.0);
            let (ee, pp1, pp2): (f64, f64, f64) = if z.abs() < 1e-4 {
                (z.exp(), 1.0 + z / 2.0 + z * z / 6.0, 0.5 + z / 6.0 + z * z / 24.0)
            } else {
                (z.exp(), (z.exp() - 1.0) / z, (z.exp() - 1.0 - z) / (z * z))
            };
            assert!((e[(0, 0)].re - ee).abs() < 1e-14, "z={z}");
            assert!((p1[(0, 0)].re - pp1).abs() < 1e-14, "z={z}");
            assert!((p2[(0, 0)].re - pp2).abs() < 1e-13, "z={z}");
        }
    }

    #[test]
    fn eigenvalues_and_kernel() {
        let a = CMatrix::from_row_slice(3, 3, &[c(-1.0), c(1.0), c(0.0), c(0.0), c(-3.0), c(0.0), c(0.0), c(0.0), c(0.0)]);
        let mut ev: Vec<f64> = eigenvalues(&a).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ev[0] + 3.0).abs() < 1e-12 && (ev[1] + 1.0).abs() < 1e-12 && ev[2].abs() < 1e-12);
        assert_eq!(kernel_dimension(&a, 1e-10), 1);
    }
}
