//! Velocity-operator verification against the Gauss-Hermite oracle, and the
//! structural identities of the macro-micro decomposition.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::velocity::{
    apply_fokker_planck, coercivity_constant, differentiate_v, enumerate_truncation, gamma_moment, macro_micro_split,
    multiply_by_v, nu_norm_sq, PointwiseOracle, QuadratureRule, Truncation, VelocityCoeffs,
};

/// Largest deviation of one operator from its reference over the samples.
#[derive(Clone, Debug, Serialize)]
pub struct OperatorDelta {
    pub operator: String,
    pub dim: usize,
    pub degree: usize,
    pub samples: usize,
    pub max_delta: f64,
}

/// Random coefficients of total degree at most `max_degree`.
pub fn random_coeffs(rng: &mut impl Rng, trunc: &Arc<Truncation>, max_degree: usize) -> VelocityCoeffs {
    let values = trunc
        .indices()
        .iter()
        .map(|m| {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if m.degree() <= max_degree {
                z
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    VelocityCoeffs::from_values(trunc, values).expect("length matches the truncation")
}

/// Compares every ladder-based velocity operation with the quadrature oracle
/// on `samples` random coefficient vectors of degree at most `degree - 1`, so
/// that multiplication by `v` stays inside the truncation.
pub fn operator_oracle_deltas(dim: usize, degree: usize, samples: usize, seed: u64) -> Result<Vec<OperatorDelta>> {
    let trunc = enumerate_truncation(dim, degree)?;
    let oracle = PointwiseOracle::new(QuadratureRule::for_truncation(&trunc), &trunc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = [
        "apply_fokker_planck",
        "multiply_by_v",
        "differentiate_v",
        "gamma_moment",
        "nu_norm_sq",
        "macro_micro_split",
    ];
    let mut worst = [0.0f64; 6];
    for _ in 0..samples {
        let c = random_coeffs(&mut rng, &trunc, degree - 1);
        worst[0] = worst[0].max(apply_fokker_planck(&c).max_abs_diff(&oracle.fokker_planck(&c)?));
        for axis in 0..dim {
            worst[1] = worst[1].max(multiply_by_v(&c, axis).max_abs_diff(&oracle.multiply_by_v(&c, axis)?));
            worst[2] = worst[2].max(differentiate_v(&c, axis).max_abs_diff(&oracle.differentiate_v(&c, axis)?));
        }
        for i in 0..dim {
            for j in 0..dim {
                worst[3] = worst[3].max((gamma_moment(&c, i, j) - oracle.gamma_moment(&c, i, j)).norm());
            }
        }
        let nu = nu_norm_sq(&c);
        worst[4] = worst[4].max((nu - oracle.nu_norm_sq(&c)).abs() / nu.max(1.0));
        let split = macro_micro_split(&c);
        let (a, b) = oracle.moments(&c);
        let mut d = (split.a - a).norm();
        for (x, y) in split.b.iter().zip(&b) {
            d = d.max((x - y).norm());
        }
        // The micro part must equal f minus the oracle's macro part.
        let mut reference = c.clone();
        reference.values_mut()[0] -= a;
        for (i, bi) in b.iter().enumerate() {
            reference.values_mut()[1 + i] -= bi;
        }
        d = d.max(split.micro.max_abs_diff(&reference));
        worst[5] = worst[5].max(d);
    }
    Ok(names
        .iter()
        .zip(worst)
        .map(|(n, w)| OperatorDelta {
            operator: (*n).into(),
            dim,
            degree,
            samples,
            max_delta: w,
        })
        .collect())
}

/// Defects of the macro-micro structure on random samples.
#[derive(Clone, Debug, Serialize)]
pub struct StructuralDefects {
    pub dim: usize,
    pub degree: usize,
    /// `max |L P f + P_1 f|`.
    pub lp_identity: f64,
    /// `max |P P f - P f|`.
    pub idempotence: f64,
    /// `max |<P f, {I - P} f>| / |f|^2`.
    pub orthogonality: f64,
    pub coercivity: f64,
}

pub fn structural_defects(dim: usize, degree: usize, samples: usize, seed: u64) -> Result<StructuralDefects> {
    let trunc = enumerate_truncation(dim, degree)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = StructuralDefects {
        dim,
        degree,
        lp_identity: 0.0,
        idempotence: 0.0,
        orthogonality: 0.0,
        coercivity: coercivity_constant(&trunc)?,
    };
    for _ in 0..samples {
        let c = random_coeffs(&mut rng, &trunc, degree);
        let split = macro_micro_split(&c);
        let p = split.macro_part();
        let mut p1 = p.clone();
        p1.values_mut()[0] = Complex64::new(0.0, 0.0);
        let lp = apply_fokker_planck(&p);
        out.lp_identity = out.lp_identity.max(lp.max_abs_diff(&p1.scale(-1.0)));
        let pp = macro_micro_split(&p).macro_part();
        out.idempotence = out.idempotence.max(pp.max_abs_diff(&p));
        let ortho = p.inner(&split.micro).norm() / c.l2_norm_sq();
        out.orthogonality = out.orthogonality.max(ortho);
    }
    Ok(out)
}
