//! Exponential time differencing (ETD-RK2, Cox-Matthews) with exact per-mode
//! linear propagators.
//!
//! ```text
//! U1      = exp(hB) Un + h phi1(hB) N(Un)
//! U(n+1)  = U1 + h phi2(hB) (N(U1) - N(Un))
//! ```
//!
//! Propagators are stored once per orbit of the signed-permutation group
//! acting on the wavenumber lattice: `B(Rk) = T B(k) T^T` where `T` permutes
//! and signs Hermite indices and velocity components alongside `R`.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::dynamics::nonlinear_rhs;
use crate::error::{Error, Result};
use crate::linalg::{phi_functions, CMatrix};
use crate::linear::build_mode_matrix;
use crate::spectral::{Grid, Transformer};
use crate::state::{DiagnosticsContext, DiagnosticsRecord, ModelParams, SystemState};
use crate::velocity::Truncation;

/// Signed permutation taking a canonical lattice index to a given one:
/// `m[perm[j]] = sign[j] * canonical[j]`.
#[derive(Clone, Debug)]
struct Symmetry {
    perm: [usize; 3],
    sign: [f64; 3],
}

impl Symmetry {
    /// Canonical representative (absolute values sorted descending) and the
    /// map back to `m`.
    fn canonicalize(m: &[i64]) -> ([i64; 3], Self) {
        let d = m.len();
        let mut axes: Vec<usize> = (0..d).collect();
        axes.sort_by(|&a, &b| m[b].abs().cmp(&m[a].abs()).then(a.cmp(&b)));
        let mut canon = [0i64; 3];
        let mut perm = [0usize; 3];
        let mut sign = [1.0; 3];
        for (j, &ax) in axes.iter().enumerate() {
            canon[j] = m[ax].abs();
            perm[j] = ax;
            sign[j] = if m[ax] < 0 { -1.0 } else { 1.0 };
        }
        (canon, Self { perm, sign })
    }
}

/// Action of a [`Symmetry`] on mode vectors `(c, rho, u)`.
#[derive(Clone, Debug)]
struct StateMap {
    /// `(target, sign)` for every source slot.
    slots: Vec<(usize, f64)>,
}

impl StateMap {
    fn new(sym: &Symmetry, trunc: &Truncation) -> Self {
        let d = trunc.dim();
        let na = trunc.len();
        let mut slots = Vec::with_capacity(na + 1 + d);
        for idx in trunc.indices() {
            let mut target = [0usize; 3];
            let mut s = 1.0;
            for j in 0..d {
                target[sym.perm[j]] = idx.get(j);
                if idx.get(j) % 2 == 1 {
                    s *= sym.sign[j];
                }
            }
            slots.push((trunc.pos(&target[..d]), s));
        }
        slots.push((na, 1.0));
        for j in 0..d {
            slots.push((na + 1 + sym.perm[j], sym.sign[j]));
        }
        Self { slots }
    }

    /// `T^T x`.
    fn pull(&self, x: &[Complex64], out: &mut [Complex64]) {
        for (o, &(t, s)) in out.iter_mut().zip(&self.slots) {
            *o = x[t] * s;
        }
    }

    /// `T y`.
    fn push(&self, y: &[Complex64], out: &mut [Complex64]) {
        for (&v, &(t, s)) in y.iter().zip(&self.slots) {
            out[t] = v * s;
        }
    }
}

/// `exp(hB)`, `phi1(hB)`, `phi2(hB)` at one canonical wavevector.
#[derive(Clone, Debug)]
pub struct ModePropagator {
    pub exp: CMatrix,
    pub phi1: CMatrix,
    pub phi2: CMatrix,
}

/// Propagators for every retained lattice mode of a grid.
#[derive(Clone, Debug)]
pub struct PropagatorTable {
    grid: Grid,
    trunc: Arc<Truncation>,
    params: ModelParams,
    dt: f64,
    canonical: Vec<ModePropagator>,
    /// For every retained mode: its flat index, canonical slot and state map.
    modes: Vec<(usize, usize, usize)>,
    maps: Vec<StateMap>,
}

pub fn precompute_propagators(grid: Grid, trunc: &Arc<Truncation>, params: &ModelParams, dt: f64) -> Result<PropagatorTable> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if grid.dim() != trunc.dim() {
        return Err(Error::InvalidArgument("grid and truncation dimensions differ".into()));
    }
    let d = grid.dim();
    let dk = grid.dk();
    let mut canon_slot: HashMap<[i64; 3], usize> = HashMap::new();
    let mut canonical = Vec::new();
    let mut map_slot: HashMap<([usize; 3], [i64; 3]), usize> = HashMap::new();
    let mut maps = Vec::new();
    let mut modes = Vec::new();
    for flat in grid.band_modes() {
        let m = grid.mode_index(flat);
        let (canon, sym) = Symmetry::canonicalize(&m[..d]);
        let slot = *canon_slot.entry(canon).or_insert_with(|| {
            let k: Vec<f64> = canon[..d].iter().map(|&c| c as f64 * dk).collect();
            let b = build_mode_matrix(&k, trunc, params);
            let (exp, phi1, phi2) = phi_functions(&b.matrix, dt);
            canonical.push(ModePropagator { exp, phi1, phi2 });
            canonical.len() - 1
        });
        let key = (sym.perm, sym.sign.map(|s| s as i64));
        let ms = *map_slot.entry(key).or_insert_with(|| {
            maps.push(StateMap::new(&sym, trunc));
            maps.len() - 1
        });
        modes.push((flat, slot, ms));
    }
    Ok(PropagatorTable {
        grid,
        trunc: Arc::clone(trunc),
        params: *params,
        dt,
        canonical,
        modes,
        maps,
    })
}

impl PropagatorTable {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Number of distinct stored propagators.
    pub fn canonical_len(&self) -> usize {
        self.canonical.len()
    }

    /// The three matrices acting at lattice mode `flat` (expanded from the
    /// canonical copy). `None` outside the 2/3 band.
    pub fn mode_matrices(&self, flat: usize) -> Option<ModePropagator> {
        let &(_, slot, ms) = self.modes.iter().find(|(f, _, _)| *f == flat)?;
        let map = &self.maps[ms];
        let n = map.slots.len();
        let mut t = CMatrix::zeros(n, n);
        for (src, &(dst, s)) in map.slots.iter().enumerate() {
            t[(dst, src)] = Complex64::new(s, 0.0);
        }
        let c = &self.canonical[slot];
        let conj = |a: &CMatrix| &t * a * t.transpose();
        Some(ModePropagator {
            exp: conj(&c.exp),
            phi1: conj(&c.phi1),
            phi2: conj(&c.phi2),
        })
    }

    fn check(&self, state: &SystemState) -> Result<()> {
        if *state.grid() != self.grid
            || state.trunc().dim() != self.trunc.dim()
            || state.trunc().max_degree() != self.trunc.max_degree()
        {
            return Err(Error::InvalidArgument("state does not match the propagator table".into()));
        }
        Ok(())
    }

    /// `out(k) = sum_j M_j(k) inputs_j(k)` at every retained mode, where `M_j`
    /// picks one of the stored matrices; modes outside the band are zero.
    fn combine(&self, terms: &[(Which, &SystemState)], time: f64) -> Result<SystemState> {
        let mut out = SystemState::zeros(self.grid, &self.trunc)?;
        out.time = time;
        let n = self.trunc.len() + 1 + self.grid.dim();
        let mut pulled = DVector::zeros(n);
        let mut acc = DVector::zeros(n);
        let mut pushed = vec![Complex64::new(0.0, 0.0); n];
        for &(flat, slot, ms) in &self.modes {
            let map = &self.maps[ms];
            acc.fill(Complex64::new(0.0, 0.0));
            let mut any = false;
            for (which, st) in terms {
                let x = st.mode_vector(flat);
                if x.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                    continue;
                }
                any = true;
                map.pull(&x, pulled.as_mut_slice());
                let c = &self.canonical[slot];
                let m = match which {
                    Which::Exp => &c.exp,
                    Which::Phi1 => &c.phi1,
                    Which::Phi2 => &c.phi2,
                };
                acc.gemv(Complex64::new(1.0, 0.0), m, &pulled, Complex64::new(1.0, 0.0));
            }
            if any {
                map.push(acc.as_slice(), &mut pushed);
                out.set_mode_vector(flat, &pushed);
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug)]
enum Which {
    Exp,
    Phi1,
    Phi2,
}

/// Fixed-step ETD-RK2 integrator.
#[derive(Clone, Debug)]
pub struct Integrator {
    table: PropagatorTable,
    transformer: Transformer,
    nonlinear: bool,
}

impl Integrator {
    pub fn new(grid: Grid, trunc: &Arc<Truncation>, params: &ModelParams, dt: f64, nonlinear: bool) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            table: precompute_propagators(grid, trunc, params, dt)?,
            transformer: Transformer::new(grid),
            nonlinear,
        })
    }

    pub fn from_table(table: PropagatorTable, nonlinear: bool) -> Self {
        let transformer = Transformer::new(table.grid);
        Self {
            table,
            transformer,
            nonlinear,
        }
    }

    pub fn table(&self) -> &PropagatorTable {
        &self.table
    }

    pub fn dt(&self) -> f64 {
        self.table.dt
    }

    pub fn transformer(&self) -> &Transformer {
        &self.transformer
    }

    /// One step from `state` to `state.time + dt`.
    pub fn step(&self, state: &SystemState) -> Result<SystemState> {
        self.table.check(state)?;
        let h = self.table.dt;
        let t1 = state.time + h;
        if !self.nonlinear {
            return self.table.combine(&[(Which::Exp, state)], t1);
        }
        let params = &self.table.params;
        let n0 = nonlinear_rhs(state, params, &self.transformer)?.scaled(h);
        let u1 = self.table.combine(&[(Which::Exp, state), (Which::Phi1, &n0)], t1)?;
        let mut diff = nonlinear_rhs(&u1, params, &self.transformer)?.scaled(h);
        diff.axpy(-1.0, &n0);
        let mut next = self.table.combine(&[(Which::Phi2, &diff)], t1)?;
        next.axpy(1.0, &u1);
        next.time = t1;
        if !next.is_finite() {
            return Err(Error::NonFinite("state after step"));
        }
        Ok(next)
    }
}

/// Outcome of a march: records at the sampling cadence, the last good state
/// and, if the march stopped early, why.
#[derive(Debug)]
pub struct IntegrationOutcome {
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: SystemState,
    pub steps: usize,
    pub abort: Option<Error>,
}

/// Number of fixed steps needed to reach `t_end`.
pub fn step_count(t0: f64, t_end: f64, dt: f64) -> usize {
    let n = (t_end - t0) / dt;
    (n - 1e-9).ceil().max(0.0) as usize
}

/// Marches to `t_end`, calling `observer` on the initial state and after every
/// `sample_every` steps (and on the final state). Observer errors and step
/// failures stop the march; the outcome keeps everything recorded so far.
pub fn integrate<R>(
    state: &SystemState,
    t_end: f64,
    integrator: &Integrator,
    sample_every: usize,
    mut observer: impl FnMut(&SystemState) -> Result<R>,
) -> (Vec<R>, SystemState, usize, Option<Error>) {
    let mut current = state.clone();
    current.truncate_band();
    let t0 = current.time;
    let dt = integrator.dt();
    let total = step_count(t0, t_end, dt);
    let every = sample_every.max(1);
    let mut out = Vec::new();
    match observer(&current) {
        Ok(r) => out.push(r),
        Err(e) => return (out, current, 0, Some(e)),
    }
    for s in 1..=total {
        let mut next = match integrator.step(&current) {
            Ok(n) => n,
            Err(e) => return (out, current, s - 1, Some(e)),
        };
        next.time = t0 + s as f64 * dt;
        current = next;
        if s % every == 0 || s == total {
            match observer(&current) {
                Ok(r) => out.push(r),
                Err(e) => return (out, current, s, Some(e)),
            }
        }
    }
    (out, current, total, None)
}

/// [`integrate`] recording a [`DiagnosticsRecord`] at each sample.
pub fn integrate_with_diagnostics(
    state: &SystemState,
    t_end: f64,
    integrator: &Integrator,
    sample_every: usize,
    ctx: &DiagnosticsContext,
) -> IntegrationOutcome {
    let (records, final_state, steps, abort) = integrate(state, t_end, integrator, sample_every, |s| ctx.record(s));
    IntegrationOutcome {
        records,
        final_state,
        steps,
        abort,
    }
}
