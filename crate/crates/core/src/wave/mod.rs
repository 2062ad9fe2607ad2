//! Acoustic wave equation `u_tt = c^2 (u_xx + u_yy) + delta(x - x_s) f(t)`
//! on the reduced grid.
//!
//! Dirichlet boundaries are imposed strongly with a projection `P`; Neumann
//! and first-order outflow boundaries weakly with penalty terms. The
//! semi-discrete system is
//!
//! ```text
//! v_tt = A v + B v_t + P d_s f(t)
//! A = c^2 P (D_L + SAT_N + SAT_O^A) P,   B = c P SAT_O^B P
//! ```
//!
//! and is advanced with classical RK4 in first-order form.

mod config;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::{Discretization, EmbeddingOperator, GlobalOperators};
use crate::error::{Error, Result};
use crate::sparse::{self, SpMat};

pub use config::{load_problem, parse_problem, problem_to_toml, ProblemFile};

pub const DEFAULT_CFL_FRACTION: f64 = 0.2;
/// Largest distance between the source and the grid point it is placed on.
pub const SOURCE_TOL: f64 = 1e-10;
pub const POWER_ITERATION_TOL: f64 = 1e-3;
pub const POWER_ITERATION_MAX: usize = 500;
pub const POWER_ITERATION_SEED: u64 = 0x005e_ed2d;
/// Extent of the RK4 stability region along the imaginary axis.
pub const RK4_IMAGINARY_LIMIT: f64 = 2.0 * std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// `u = 0`
    Dirichlet,
    /// `n . grad u = 0`
    Neumann,
    /// `u_t + c n . grad u = 0`
    Outflow,
}

/// Gaussian-in-time point source located on a grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSource {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
    pub t_source: f64,
    pub amplitude: f64,
}

impl PointSource {
    pub fn at(x: f64, y: f64, sigma: f64, t_source: f64) -> Self {
        Self {
            x,
            y,
            sigma,
            t_source,
            amplitude: 1.0,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        if self.amplitude == 0.0 {
            0.0
        } else {
            self.amplitude * forcing(t, self.sigma, self.t_source)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveProblem {
    pub c: f64,
    /// Boundary condition for every mesh tag.
    pub boundary: BTreeMap<String, BoundaryCondition>,
    pub source: PointSource,
    pub t_end: f64,
    pub cfl_fraction: f64,
    pub snapshot_every: usize,
}

impl WaveProblem {
    /// The circle experiment: unit speed, a pulse at the origin with
    /// `sigma = 0.04`, `t_s = 0.3`, observed at `t = 0.8`.
    pub fn circle_experiment(tag: &str, bc: BoundaryCondition) -> Self {
        Self {
            c: 1.0,
            boundary: BTreeMap::from([(tag.to_string(), bc)]),
            source: PointSource::at(0.0, 0.0, 0.04, 0.3),
            t_end: 0.8,
            cfl_fraction: DEFAULT_CFL_FRACTION,
            snapshot_every: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Configuration(msg));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.c) {
            return bad(format!("wave speed must be positive, got {}", self.c));
        }
        if !positive(self.source.sigma) {
            return bad(format!("sigma must be positive, got {}", self.source.sigma));
        }
        if !positive(self.t_end) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !positive(self.cfl_fraction) {
            return bad(format!(
                "cfl_fraction must be positive, got {}",
                self.cfl_fraction
            ));
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be at least 1".into());
        }
        let finite = [
            self.source.x,
            self.source.y,
            self.source.t_source,
            self.source.amplitude,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("source position, time and amplitude must be finite".into());
        }
        Ok(())
    }
}

/// `f(t) = exp(-(t - t_s)^2 / (2 sigma^2)) / (sigma sqrt(2 pi))`
pub fn forcing(t: f64, sigma: f64, t_source: f64) -> f64 {
    let z = (t - t_source) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// The projection `P = I - H^-1 L^T (L H^-1 L^T)^-1 L`. With `L` made of
/// distinct unit selectors and `H` diagonal this is a 0/1 diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    keep: Vec<bool>,
    constrained: Vec<usize>,
}

impl Projection {
    pub fn identity(n: usize) -> Self {
        Self {
            keep: vec![true; n],
            constrained: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn keeps(&self, i: usize) -> bool {
        self.keep[i]
    }

    /// Sorted reduced indices zeroed by `P`.
    pub fn constrained(&self) -> &[usize] {
        &self.constrained
    }

    pub fn apply(&self, v: &mut [f64]) {
        for &i in &self.constrained {
            v[i] = 0.0;
        }
    }

    pub fn matrix(&self) -> SpMat {
        let d: Vec<f64> = self
            .keep
            .iter()
            .map(|&k| if k { 1.0 } else { 0.0 })
            .collect();
        sparse::diag(&d)
    }
}

/// Build `P` from stacked Dirichlet restriction rows. Repeated rows (corners
/// shared by two Dirichlet sides) are merged first.
pub fn build_projection(l: &SpMat, h: &[f64]) -> Result<Projection> {
    let n = h.len();
    if l.cols() != n {
        return Err(Error::InvalidArgument(format!(
            "constraint matrix has {} columns for {n} unknowns",
            l.cols()
        )));
    }
    let l = if l.is_csr() { l.clone() } else { l.to_csr() };
    let mut rows = BTreeSet::new();
    for (r, row) in l.outer_iterator().enumerate() {
        let entries: Vec<(usize, f64)> = row.iter().map(|(j, &v)| (j, v)).collect();
        match entries[..] {
            [(j, 1.0)] => {
                rows.insert(j);
            }
            _ => {
                return Err(Error::Unsupported(format!(
                    "constraint row {r} is not a unit point selector"
                )))
            }
        }
    }
    // L H^-1 L^T = diag(1 / h_j), so the correction H^-1 L^T (..)^-1 L is
    // the unit selector of each constrained point.
    let mut keep = vec![true; n];
    for &j in &rows {
        if !(h[j] > 0.0) {
            return Err(Error::Internal(format!(
                "singular constraint system: quadrature weight {} at point {j}",
                h[j]
            )));
        }
        keep[j] = false;
    }
    Ok(Projection {
        keep,
        constrained: rows.into_iter().collect(),
    })
}

/// Single nonzero `1 / H_ii` at the grid point holding the source.
pub fn dirac_vector(coords: &[[f64; 2]], h: &[f64], x: f64, y: f64) -> Result<(usize, Vec<f64>)> {
    let (idx, dist) = coords
        .iter()
        .enumerate()
        .map(|(i, p)| (i, (p[0] - x).hypot(p[1] - y)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::Configuration("empty grid".into()))?;
    if !(dist <= SOURCE_TOL) {
        let p = coords[idx];
        return Err(Error::Configuration(format!(
            "source ({x}, {y}) is not on a grid point; nearest is ({}, {}) at distance {dist:e}",
            p[0], p[1]
        )));
    }
    let mut d = vec![0.0; h.len()];
    d[idx] = 1.0 / h[idx];
    Ok((idx, d))
}

/// Everything the time stepper needs.
#[derive(Debug, Clone)]
pub struct SemiDiscreteSystem {
    pub c: f64,
    pub a: SpMat,
    /// Diagonal of `B`.
    pub b: Vec<f64>,
    pub projection: Projection,
    /// `d_s` before projection.
    pub d_s: Vec<f64>,
    pub source_index: usize,
    pub source: PointSource,
    pub h: Vec<f64>,
    /// Reduced indices carrying a penalty, per condition.
    pub penalized: BTreeMap<BoundaryCondition, Vec<usize>>,
}

impl SemiDiscreteSystem {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn b_matrix(&self) -> SpMat {
        sparse::diag(&self.b)
    }

    pub fn has_outflow(&self) -> bool {
        self.b.iter().any(|&v| v != 0.0)
    }

    /// `P d_s f(t)`
    pub fn forcing_at(&self, t: f64) -> (usize, f64) {
        let i = self.source_index;
        if !self.projection.keeps(i) {
            return (i, 0.0);
        }
        (i, self.d_s[i] * self.source.value(t))
    }

    /// `(v', v_t') = (v_t, A v + B v_t + P d_s f(t))`
    fn rhs(&self, t: f64, v: &[f64], vt: &[f64], dv: &mut [f64], dvt: &mut [f64]) {
        dv.copy_from_slice(vt);
        sparse::matvec_into(&self.a, v, dvt);
        for ((o, b), w) in dvt.iter_mut().zip(&self.b).zip(vt) {
            *o += b * w;
        }
        let (i, f) = self.forcing_at(t);
        dvt[i] += f;
    }
}

/// Assemble `A`, `B`, `P` and `d_s` for a problem on a discretization.
pub fn build_system(disc: &Discretization, problem: &WaveProblem) -> Result<SemiDiscreteSystem> {
    problem.validate()?;
    let g = &disc.global;
    let n = disc.n_reduced();
    let h = &g.h_reduced;

    let mut conditions = BTreeMap::new();
    for tag in g.boundaries.keys() {
        let bc = problem.boundary.get(tag).ok_or_else(|| {
            Error::Configuration(format!("boundary tag '{tag}' has no boundary condition"))
        })?;
        conditions.insert(tag.as_str(), *bc);
    }
    if let Some(extra) = problem
        .boundary
        .keys()
        .find(|t| !g.boundaries.contains_key(t.as_str()))
    {
        return Err(Error::Configuration(format!(
            "boundary condition given for tag '{extra}' which is not in the mesh (tags: {})",
            g.boundaries.keys().cloned().collect::<Vec<_>>().join(", ")
        )));
    }

    let mut dirichlet_rows = Vec::new();
    for (tag, stack) in &g.boundaries {
        if conditions[tag.as_str()] == BoundaryCondition::Dirichlet {
            for &r in &stack.reduced_index {
                dirichlet_rows.push((dirichlet_rows.len(), r, 1.0));
            }
        }
    }
    let l = sparse::from_triplets(dirichlet_rows.len(), n, &dirichlet_rows);
    let projection = build_projection(&l, h)?;

    let mut sat = Vec::new();
    let mut b = vec![0.0; n];
    let mut penalized: BTreeMap<BoundaryCondition, Vec<usize>> = BTreeMap::new();
    for (tag, stack) in &g.boundaries {
        let bc = conditions[tag.as_str()];
        if bc == BoundaryCondition::Dirichlet {
            continue;
        }
        for (row, d_row) in stack.d.outer_iterator().enumerate() {
            let r = stack.reduced_index[row];
            if !projection.keeps(r) {
                continue;
            }
            penalized.entry(bc).or_default().push(r);
            let w = stack.h[row] / h[r];
            for (j, &v) in d_row.iter() {
                sat.push((r, j, -w * v));
            }
            if bc == BoundaryCondition::Outflow {
                b[r] -= problem.c * w;
            }
        }
    }
    for list in penalized.values_mut() {
        list.sort_unstable();
        list.dedup();
    }

    let c2 = problem.c * problem.c;
    let mut entries = Vec::with_capacity(g.dl_reduced.nnz() + sat.len());
    for (&v, (i, j)) in g.dl_reduced.iter() {
        entries.push((i, j, v));
    }
    entries.extend(sat);
    let entries: Vec<_> = entries
        .into_iter()
        .filter(|&(i, j, _)| projection.keeps(i) && projection.keeps(j))
        .map(|(i, j, v)| (i, j, c2 * v))
        .collect();
    let a = sparse::from_triplets(n, n, &entries);

    let (source_index, d_s) = dirac_vector(disc.coords(), h, problem.source.x, problem.source.y)?;
    Ok(SemiDiscreteSystem {
        c: problem.c,
        a,
        b,
        projection,
        d_s,
        source_index,
        source: problem.source,
        h: h.clone(),
        penalized,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum SpectralEstimate {
    PowerIteration { iterations: usize },
    Gershgorin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeStep {
    pub dt: f64,
    /// Estimated spectral radius of `-A`.
    pub rho: f64,
    pub estimate: SpectralEstimate,
}

/// Largest eigenvalue magnitude of `-A` by power iteration in the `H` inner
/// product, falling back to the Gershgorin bound if it does not settle.
pub fn spectral_radius(sys: &SemiDiscreteSystem) -> (f64, SpectralEstimate) {
    let n = sys.len();
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    sys.projection.apply(&mut x);
    let norm = |v: &[f64]| sparse::weighted_dot(&sys.h, v, v).sqrt();
    let mut y = vec![0.0; n];
    let mut last = f64::NAN;
    let nx = norm(&x);
    if nx > 0.0 {
        x.iter_mut().for_each(|v| *v /= nx);
        for it in 1..=POWER_ITERATION_MAX {
            sparse::matvec_into(&sys.a, &x, &mut y);
            y.iter_mut().for_each(|v| *v = -*v);
            let lambda = sparse::weighted_dot(&sys.h, &x, &y);
            let ny = norm(&y);
            if !(ny > 0.0) || !lambda.is_finite() {
                break;
            }
            if (lambda - last).abs() <= POWER_ITERATION_TOL * lambda.abs() {
                return (lambda, SpectralEstimate::PowerIteration { iterations: it });
            }
            last = lambda;
            for (a, b) in x.iter_mut().zip(&y) {
                *a = b / ny;
            }
        }
    }
    let bound = sys
        .a
        .outer_iterator()
        .map(|row| row.iter().map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    (bound, SpectralEstimate::Gershgorin)
}

/// `dt = theta 2 sqrt(2) / sqrt(rho)`.
pub fn stable_dt(sys: &SemiDiscreteSystem, theta: f64) -> Result<TimeStep> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "CFL fraction must be positive, got {theta}"
        )));
    }
    let (rho, estimate) = spectral_radius(sys);
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "cannot choose a time step: spectral radius estimate is {rho}"
        )));
    }
    Ok(TimeStep {
        dt: theta * RK4_IMAGINARY_LIMIT / rho.sqrt(),
        rho,
        estimate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub v: Vec<f64>,
    pub v_t: Vec<f64>,
    pub t: f64,
}

impl WaveState {
    pub fn zeros(n: usize) -> Self {
        Self {
            v: vec![0.0; n],
            v_t: vec![0.0; n],
            t: 0.0,
        }
    }
}

/// One classical RK4 step; `step` is only used in error reports.
pub fn rk4_step(
    sys: &SemiDiscreteSystem,
    state: &WaveState,
    dt: f64,
    step: usize,
) -> Result<WaveState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let n = sys.len();
    let t = state.t;
    let (v, vt) = (&state.v, &state.v_t);
    let mut k = [(); 4].map(|_| (vec![0.0; n], vec![0.0; n]));
    let mut sv = vec![0.0; n];
    let mut svt = vec![0.0; n];
    let stage = [0.0, 0.5 * dt, 0.5 * dt, dt];
    for s in 0..4 {
        let (prev, rest) = k.split_at_mut(s);
        let (kv, kvt) = &mut rest[0];
        if s == 0 {
            sys.rhs(t, v, vt, kv, kvt);
        } else {
            let (pv, pvt) = &prev[s - 1];
            let a = stage[s];
            for i in 0..n {
                sv[i] = v[i] + a * pv[i];
                svt[i] = vt[i] + a * pvt[i];
            }
            sys.rhs(t + a, &sv, &svt, kv, kvt);
        }
    }
    let w = dt / 6.0;
    let mut out = WaveState {
        v: v.clone(),
        v_t: vt.clone(),
        t: t + dt,
    };
    for i in 0..n {
        out.v[i] += w * (k[0].0[i] + 2.0 * k[1].0[i] + 2.0 * k[2].0[i] + k[3].0[i]);
        out.v_t[i] += w * (k[0].1[i] + 2.0 * k[1].1[i] + 2.0 * k[2].1[i] + k[3].1[i]);
    }
    if out.v.iter().chain(&out.v_t).any(|x| !x.is_finite()) {
        return Err(Error::Divergence { step });
    }
    Ok(out)
}

/// `|v_t|_H^2 + c^2 (|Dx+ E P v|^2 + |Dy+ E P v|^2)_{H+}`
pub fn discrete_energy(
    state: &WaveState,
    sys: &SemiDiscreteSystem,
    g: &GlobalOperators,
    e: &EmbeddingOperator,
) -> f64 {
    let mut v = state.v.clone();
    sys.projection.apply(&mut v);
    let ev = e.embed(&v);
    let gx = sparse::matvec(&g.dx_plus, &ev);
    let gy = sparse::matvec(&g.dy_plus, &ev);
    let kinetic = sparse::weighted_dot(&sys.h, &state.v_t, &state.v_t);
    let potential =
        sparse::weighted_dot(&g.h_plus, &gx, &gx) + sparse::weighted_dot(&g.h_plus, &gy, &gy);
    kinetic + sys.c * sys.c * potential
}

/// `sqrt(sum_i H_ii (v_i - u_i)^2)` over all points not in `excluded`.
pub fn l2_error(v: &[f64], exact: &[f64], h: &[f64], excluded: &[usize]) -> f64 {
    let skip: BTreeSet<usize> = excluded.iter().copied().collect();
    v.iter()
        .zip(exact)
        .zip(h)
        .enumerate()
        .filter(|(i, _)| !skip.contains(i))
        .map(|(_, ((a, b), w))| w * (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// `q = log(e1 / e2) / log(sqrt(N2 / N1))`, or `None` when undefined.
pub fn convergence_rate(e1: f64, n1: usize, e2: f64, n2: usize) -> Option<f64> {
    let ok = |e: f64| e.is_finite() && e > 0.0;
    if !ok(e1) || !ok(e2) || n1 == 0 || n2 == 0 || n1 == n2 {
        return None;
    }
    Some((e1 / e2).ln() / (n2 as f64 / n1 as f64).sqrt().ln())
}
