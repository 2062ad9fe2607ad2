//! Operator identity checks on built-in blocks and meshes, with measured
//! residuals and the thresholds they are held to.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::Discretization;
use crate::error::{Error, Result};
use crate::geometry::{build_block_operators, green_residual_block, tensor_operators};
use crate::mesh::{
    generate_circle_mesh, generate_rectangle_mesh, Block, CurvedEdge, MultiblockMesh,
};
use crate::sbp1d::{sbp_residual, SbpOperator1D, SUPPORTED_ORDERS};
use crate::sparse;
use crate::wave::{build_system, BoundaryCondition, PointSource, WaveProblem};

pub const SBP_TOL_PER_NODE: f64 = 1e-13;
pub const QUADRATURE_TOL: f64 = 1e-13;
pub const GREEN_TOL: f64 = 1e-10;
pub const AREA_TOL: f64 = 1e-12;
pub const SELF_ADJOINT_TOL: f64 = 1e-10;
const SEED: u64 = 20_231_017;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub p: usize,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Why the check could not be evaluated, if it could not.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Check {
    fn new(name: impl Into<String>, p: usize, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            p,
            value,
            threshold,
            passed: value <= threshold,
            error: None,
        }
    }

    fn failed(name: impl Into<String>, p: usize, threshold: f64, err: &Error) -> Self {
        Self {
            error: Some(err.to_string()),
            ..Self::new(name, p, f64::INFINITY, threshold)
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Identity map, an affine parallelogram, and a quarter annulus (radial
/// `xi`, angular `eta`).
pub fn reference_blocks() -> Vec<(&'static str, Block)> {
    vec![
        (
            "identity",
            Block::quad([0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]),
        ),
        (
            "affine",
            Block::quad([0.0, 0.0], [2.0, 0.5], [2.5, 2.0], [0.5, 1.5]),
        ),
        (
            "quarter-annulus",
            Block::new(
                CurvedEdge::line([1.0, 0.0], [2.0, 0.0]),
                CurvedEdge::arc([0.0, 0.0], 2.0, 0.0, FRAC_PI_2),
                CurvedEdge::line([0.0, 1.0], [0.0, 2.0]),
                CurvedEdge::arc([0.0, 0.0], 1.0, 0.0, FRAC_PI_2),
            ),
        ),
    ]
}

/// Two side-by-side squares, a 2 x 2 square, and the circle at refinement 1.
pub fn reference_meshes() -> Vec<(&'static str, MultiblockMesh)> {
    vec![
        (
            "two-block",
            generate_rectangle_mesh(2, 1, [0.0, 2.0], [0.0, 1.0], "wall"),
        ),
        (
            "2x2-block",
            generate_rectangle_mesh(2, 2, [0.0, 1.0], [0.0, 1.0], "wall"),
        ),
        ("circle-r1", generate_circle_mesh(1, "outer")),
    ]
}

/// `max_k |sum_i w_i x_i^k - 1 / (k + 1)|` for `k <= 2n - 3` on `[0, 1]`.
pub fn quadrature_exactness_error(op: &SbpOperator1D) -> f64 {
    let n = op.len();
    (0..=(2 * n).saturating_sub(3))
        .map(|k| {
            let q: f64 = op
                .nodes()
                .iter()
                .zip(op.weights())
                .map(|(x, w)| w * x.powi(k as i32))
                .sum();
            (q - 1.0 / (k as f64 + 1.0)).abs()
        })
        .fold(0.0, f64::max)
}

fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Run every check for one operator with `pairs` random vector pairs per
/// identity.
pub fn verify_operator(op: &SbpOperator1D, pairs: usize) -> Result<Vec<Check>> {
    let p = op.order();
    let n = op.len();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + p as u64);
    let mut checks = vec![
        Check::new(
            "sbp-residual",
            p,
            sbp_residual(op),
            SBP_TOL_PER_NODE * n as f64,
        ),
        Check::new(
            "quadrature-exactness",
            p,
            quadrature_exactness_error(op),
            QUADRATURE_TOL,
        ),
    ];

    let t = tensor_operators(op);
    for (name, block) in reference_blocks() {
        let name = format!("block-green/{name}");
        let ops = match build_block_operators(0, &block, op, &t) {
            Ok(ops) => ops,
            Err(e) => {
                checks.push(Check::failed(name, p, GREEN_TOL, &e));
                continue;
            }
        };
        let worst = (0..pairs)
            .map(|_| {
                let u = random(&mut rng, n * n);
                let v = random(&mut rng, n * n);
                green_residual_block(&ops, &u, &v)
            })
            .fold(0.0, f64::max);
        checks.push(Check::new(name, p, worst, GREEN_TOL));
    }

    for (name, mesh) in reference_meshes() {
        let disc = match Discretization::new(mesh, op.clone()) {
            Ok(d) => d,
            Err(e) => {
                checks.push(Check::failed(
                    format!("global-green/{name}"),
                    p,
                    GREEN_TOL,
                    &e,
                ));
                continue;
            }
        };
        let worst = (0..pairs)
            .map(|_| {
                let u = random(&mut rng, disc.n_reduced());
                let v = random(&mut rng, disc.n_reduced());
                disc.green_residual(&u, &v)
            })
            .fold(0.0, f64::max);
        checks.push(Check::new(
            format!("global-green/{name}"),
            p,
            worst,
            GREEN_TOL,
        ));
        if name != "circle-r1" {
            let area = if name == "two-block" { 2.0 } else { 1.0 };
            let sum: f64 = disc.global.h_reduced.iter().sum();
            checks.push(Check::new(
                format!("reduced-norm-area/{name}"),
                p,
                (sum - area).abs(),
                AREA_TOL,
            ));
        }
    }

    match verify_wave_system(op, pairs, &mut rng) {
        Ok(c) => checks.extend(c),
        Err(e) => checks.push(Check::failed("wave-system", p, SELF_ADJOINT_TOL, &e)),
    }
    Ok(checks)
}

/// Self-adjointness and semi-boundedness of the wave operator on the circle
/// with Dirichlet, Neumann and outflow arcs.
fn verify_wave_system(
    op: &SbpOperator1D,
    pairs: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Check>> {
    let p = op.order();
    let mut mesh = generate_circle_mesh(1, "outer");
    mesh.retag(|_, m| {
        let a = m[1].atan2(m[0]).rem_euclid(std::f64::consts::TAU);
        ["d", "n", "o"][((a / (std::f64::consts::TAU / 3.0)) as usize).min(2)].to_string()
    });
    let disc = Discretization::new(mesh, op.clone())?;
    let problem = WaveProblem {
        c: 1.0,
        boundary: [
            ("d", BoundaryCondition::Dirichlet),
            ("n", BoundaryCondition::Neumann),
            ("o", BoundaryCondition::Outflow),
        ]
        .into_iter()
        .map(|(t, b)| (t.to_string(), b))
        .collect(),
        source: PointSource::at(0.0, 0.0, 0.04, 0.3),
        t_end: 1.0,
        cfl_fraction: 0.2,
        snapshot_every: 1,
    };
    let sys = build_system(&disc, &problem)?;
    let h = &sys.h;
    let norm_a = sparse::max_abs(&sys.a);
    let (mut asym, mut upper, mut b_upper) = (0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..pairs {
        let u = random(rng, sys.len());
        let v = random(rng, sys.len());
        let nu = sparse::weighted_dot(h, &u, &u).sqrt();
        let nv = sparse::weighted_dot(h, &v, &v).sqrt();
        let au = sparse::matvec(&sys.a, &u);
        let av = sparse::matvec(&sys.a, &v);
        let scale = norm_a * nu * nv;
        asym = asym.max(
            (sparse::weighted_dot(h, &u, &av) - sparse::weighted_dot(h, &au, &v)).abs() / scale,
        );
        upper = upper.max(sparse::weighted_dot(h, &u, &au) / (norm_a * nu * nu));
        let ubu: f64 = (0..sys.len()).map(|i| h[i] * sys.b[i] * u[i] * u[i]).sum();
        b_upper = b_upper.max(ubu / (nu * nu));
    }
    if !sys.has_outflow() {
        return Err(Error::Internal("mixed circle lost its outflow arc".into()));
    }
    Ok(vec![
        Check::new("wave-A-self-adjoint", p, asym, SELF_ADJOINT_TOL),
        Check::new("wave-A-semibounded", p, upper.max(0.0), SELF_ADJOINT_TOL),
        Check::new("wave-B-dissipative", p, b_upper.max(0.0), 1e-12),
    ])
}

/// Run the suite for the given orders. `perturb_weight` scales the second
/// quadrature weight by `1 + rel`, which must make the suite fail.
pub fn verify_suite(
    orders: &[usize],
    pairs: usize,
    perturb_weight: Option<f64>,
) -> Result<VerifyReport> {
    if orders.is_empty() {
        return Err(Error::InvalidArgument("no operator orders given".into()));
    }
    if let Some(p) = orders.iter().find(|p| !SUPPORTED_ORDERS.contains(p)) {
        return Err(Error::InvalidArgument(format!(
            "unsupported order {p}; supported orders are {SUPPORTED_ORDERS:?}"
        )));
    }
    let mut report = VerifyReport::default();
    for &p in orders {
        let mut op = SbpOperator1D::gauss_lobatto(p)?;
        if let Some(rel) = perturb_weight {
            op = op.with_perturbed_weight(1, rel);
        }
        report.checks.extend(verify_operator(&op, pairs)?);
    }
    Ok(report)
}
