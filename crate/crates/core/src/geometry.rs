//! Per-block curvilinear operators built from tensor products of a 1D SBP
//! operator: metric terms, the transformed Laplacian, first derivatives in
//! `x` and `y`, the volume norm, and boundary restriction, normal-derivative
//! and quadrature operators for each side.

use crate::error::{Error, Result};
use crate::mesh::{block_grid, Block, Side};
use crate::sbp1d::SbpOperator1D;
use crate::sparse::{self, SpMat};

/// Tensor-product operators on the reference square, ordered `xi`-major.
#[derive(Debug, Clone)]
pub struct TensorOperators {
    pub n: usize,
    /// `D1 (x) I`
    pub d_xi: SpMat,
    /// `I (x) D1`
    pub d_eta: SpMat,
    /// Diagonal of `H (x) I`.
    pub h_xi: Vec<f64>,
    /// Diagonal of `I (x) H`.
    pub h_eta: Vec<f64>,
    /// 1D quadrature weights, used for boundary norms.
    pub weights: Vec<f64>,
}

impl TensorOperators {
    /// Block-local indices selected by `e_k` for side `k`.
    pub fn side_indices(&self, side: Side) -> Vec<usize> {
        side.node_indices(self.n)
    }

    /// `e_k` as an `n x n^2` selector matrix.
    pub fn selector(&self, side: Side) -> SpMat {
        let entries: Vec<_> = self
            .side_indices(side)
            .into_iter()
            .enumerate()
            .map(|(k, idx)| (k, idx, 1.0))
            .collect();
        sparse::from_triplets(self.n, self.n * self.n, &entries)
    }
}

pub fn tensor_operators(op: &SbpOperator1D) -> TensorOperators {
    let n = op.len();
    let d1 = op.d1();
    let w = op.weights();
    let mut xi_entries = Vec::with_capacity(n * n * n);
    let mut eta_entries = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for k in 0..n {
                let a = d1[(i, k)];
                if a != 0.0 {
                    xi_entries.push((row, k * n + j, a));
                }
                let b = d1[(j, k)];
                if b != 0.0 {
                    eta_entries.push((row, i * n + k, b));
                }
            }
        }
    }
    let mut h_xi = vec![0.0; n * n];
    let mut h_eta = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            h_xi[i * n + j] = w[i];
            h_eta[i * n + j] = w[j];
        }
    }
    TensorOperators {
        n,
        d_xi: sparse::from_triplets(n * n, n * n, &xi_entries),
        d_eta: sparse::from_triplets(n * n, n * n, &eta_entries),
        h_xi,
        h_eta,
        weights: w.to_vec(),
    }
}

/// Pointwise metric quantities of a mapped block.
#[derive(Debug, Clone)]
pub struct Metric {
    pub x_xi: Vec<f64>,
    pub x_eta: Vec<f64>,
    pub y_xi: Vec<f64>,
    pub y_eta: Vec<f64>,
    pub jacobian: Vec<f64>,
    pub alpha1: Vec<f64>,
    pub beta: Vec<f64>,
    pub alpha2: Vec<f64>,
}

impl Metric {
    /// `sqrt(x_xi^2 + y_xi^2)` at grid point `i` (scales south/north sides).
    pub fn w1(&self, i: usize) -> f64 {
        self.x_xi[i].hypot(self.y_xi[i])
    }

    /// `sqrt(x_eta^2 + y_eta^2)` at grid point `i` (scales west/east sides).
    pub fn w2(&self, i: usize) -> f64 {
        self.x_eta[i].hypot(self.y_eta[i])
    }
}

/// Metric terms from discrete derivatives of the grid coordinates. Fails if
/// the Jacobian is not strictly positive everywhere.
pub fn metric_terms(t: &TensorOperators, x: &[f64], y: &[f64], block: usize) -> Result<Metric> {
    let x_xi = sparse::matvec(&t.d_xi, x);
    let x_eta = sparse::matvec(&t.d_eta, x);
    let y_xi = sparse::matvec(&t.d_xi, y);
    let y_eta = sparse::matvec(&t.d_eta, y);
    let npts = x.len();
    let mut jacobian = vec![0.0; npts];
    let mut alpha1 = vec![0.0; npts];
    let mut beta = vec![0.0; npts];
    let mut alpha2 = vec![0.0; npts];
    for i in 0..npts {
        let j = x_xi[i] * y_eta[i] - x_eta[i] * y_xi[i];
        if !(j > 0.0) {
            return Err(Error::InvalidMapping {
                block,
                point: i,
                x: x[i],
                y: y[i],
                jacobian: j,
            });
        }
        jacobian[i] = j;
        alpha1[i] = (x_eta[i] * x_eta[i] + y_eta[i] * y_eta[i]) / j;
        beta[i] = -(x_xi[i] * x_eta[i] + y_xi[i] * y_eta[i]) / j;
        alpha2[i] = (x_xi[i] * x_xi[i] + y_xi[i] * y_xi[i]) / j;
    }
    Ok(Metric {
        x_xi,
        x_eta,
        y_xi,
        y_eta,
        jacobian,
        alpha1,
        beta,
        alpha2,
    })
}

fn reciprocal(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| 1.0 / x).collect()
}

/// `J^-1 (D_xi a1 D_xi + D_eta b D_xi + D_xi b D_eta + D_eta a2 D_eta)`
pub fn laplace_block(m: &Metric, t: &TensorOperators) -> SpMat {
    let xx = &t.d_xi * &sparse::scale_rows(&t.d_xi, &m.alpha1);
    let ex = &t.d_eta * &sparse::scale_rows(&t.d_xi, &m.beta);
    let xe = &t.d_xi * &sparse::scale_rows(&t.d_eta, &m.beta);
    let ee = &t.d_eta * &sparse::scale_rows(&t.d_eta, &m.alpha2);
    let sum = &(&(&xx + &ex) + &xe) + &ee;
    sparse::scale_rows(&sum, &reciprocal(&m.jacobian))
}

/// `Dx = J^-1 (Y_eta D_xi - Y_xi D_eta)`, `Dy = J^-1 (-X_eta D_xi + X_xi D_eta)`
pub fn first_derivatives(m: &Metric, t: &TensorOperators) -> (SpMat, SpMat) {
    let n2 = m.jacobian.len();
    let mut a = vec![0.0; n2];
    let mut b = vec![0.0; n2];
    let mut c = vec![0.0; n2];
    let mut d = vec![0.0; n2];
    for i in 0..n2 {
        let jinv = 1.0 / m.jacobian[i];
        a[i] = m.y_eta[i] * jinv;
        b[i] = -m.y_xi[i] * jinv;
        c[i] = -m.x_eta[i] * jinv;
        d[i] = m.x_xi[i] * jinv;
    }
    let dx = &sparse::scale_rows(&t.d_xi, &a) + &sparse::scale_rows(&t.d_eta, &b);
    let dy = &sparse::scale_rows(&t.d_xi, &c) + &sparse::scale_rows(&t.d_eta, &d);
    (dx, dy)
}

/// Restriction, normal derivative and quadrature for one block side.
#[derive(Debug, Clone)]
pub struct SideOperators {
    pub side: Side,
    /// Block-local indices selected by `e_k`, in side order.
    pub indices: Vec<usize>,
    /// `d_k = n^(1) e_k Dx + n^(2) e_k Dy`, an `n x n^2` matrix.
    pub d: SpMat,
    /// Diagonal of `H_k`.
    pub h: Vec<f64>,
    pub normal_x: Vec<f64>,
    pub normal_y: Vec<f64>,
}

impl SideOperators {
    /// `e_k u`
    pub fn restrict(&self, u: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| u[i]).collect()
    }
}

/// Outward unit normals, boundary quadratures and normal-derivative operators
/// for the four sides.
pub fn boundary_operators(
    m: &Metric,
    dx: &SpMat,
    dy: &SpMat,
    weights: &[f64],
) -> [SideOperators; 4] {
    let n = weights.len();
    Side::ALL.map(|side| {
        let indices = side.node_indices(n);
        let mut h = Vec::with_capacity(n);
        let mut nx = Vec::with_capacity(n);
        let mut ny = Vec::with_capacity(n);
        for (k, &i) in indices.iter().enumerate() {
            let (w, ax, ay) = match side {
                Side::West => {
                    let w = m.w2(i);
                    (w, -m.y_eta[i] / w, m.x_eta[i] / w)
                }
                Side::East => {
                    let w = m.w2(i);
                    (w, m.y_eta[i] / w, -m.x_eta[i] / w)
                }
                Side::South => {
                    let w = m.w1(i);
                    (w, m.y_xi[i] / w, -m.x_xi[i] / w)
                }
                Side::North => {
                    let w = m.w1(i);
                    (w, -m.y_xi[i] / w, m.x_xi[i] / w)
                }
            };
            h.push(weights[k] * w);
            nx.push(ax);
            ny.push(ay);
        }
        let mut entries = Vec::new();
        for (k, &i) in indices.iter().enumerate() {
            for (mat, scale) in [(dx, nx[k]), (dy, ny[k])] {
                let row = mat.outer_view(i).expect("row index within block");
                for (j, &v) in row.iter() {
                    entries.push((k, j, scale * v));
                }
            }
        }
        SideOperators {
            side,
            indices,
            d: sparse::from_triplets(n, dx.cols(), &entries),
            h,
            normal_x: nx,
            normal_y: ny,
        }
    })
}

/// Everything needed from one block to assemble the global scheme.
#[derive(Debug, Clone)]
pub struct BlockOperators {
    pub n: usize,
    pub coords: Vec<[f64; 2]>,
    pub metric: Metric,
    pub laplace: SpMat,
    pub dx: SpMat,
    pub dy: SpMat,
    /// Diagonal of `H_xi H_eta J`.
    pub h: Vec<f64>,
    /// South, east, north, west.
    pub sides: [SideOperators; 4],
}

impl BlockOperators {
    pub fn side(&self, side: Side) -> &SideOperators {
        &self.sides[side.index()]
    }

    /// Quadrature of the Jacobian, i.e. the discrete block area.
    pub fn area(&self) -> f64 {
        self.h.iter().sum()
    }
}

pub fn build_block_operators(
    index: usize,
    block: &Block,
    op: &SbpOperator1D,
    t: &TensorOperators,
) -> Result<BlockOperators> {
    let coords = block_grid(block, op);
    build_block_operators_from_coords(index, coords, t)
}

/// As [`build_block_operators`] for an explicit grid (used when the grid
/// does not come from a Coons patch, e.g. analytic test mappings).
pub fn build_block_operators_from_coords(
    index: usize,
    coords: Vec<[f64; 2]>,
    t: &TensorOperators,
) -> Result<BlockOperators> {
    let x: Vec<f64> = coords.iter().map(|p| p[0]).collect();
    let y: Vec<f64> = coords.iter().map(|p| p[1]).collect();
    let metric = metric_terms(t, &x, &y, index)?;
    let laplace = laplace_block(&metric, t);
    let (dx, dy) = first_derivatives(&metric, t);
    let h = (0..coords.len())
        .map(|i| t.h_xi[i] * t.h_eta[i] * metric.jacobian[i])
        .collect();
    let sides = boundary_operators(&metric, &dx, &dy, &t.weights);
    Ok(BlockOperators {
        n: t.n,
        coords,
        metric,
        laplace,
        dx,
        dy,
        h,
        sides,
    })
}

/// Relative residual of the single-block Green identity
/// `(u, D_L v)_H + (Dx u, Dx v)_H + (Dy u, Dy v)_H - sum_k <e_k u, d_k v>_{H_k}`.
pub fn green_residual_block(ops: &BlockOperators, u: &[f64], v: &[f64]) -> f64 {
    let lap = sparse::weighted_dot(&ops.h, u, &sparse::matvec(&ops.laplace, v));
    let gx = sparse::weighted_dot(
        &ops.h,
        &sparse::matvec(&ops.dx, u),
        &sparse::matvec(&ops.dx, v),
    );
    let gy = sparse::weighted_dot(
        &ops.h,
        &sparse::matvec(&ops.dy, u),
        &sparse::matvec(&ops.dy, v),
    );
    let bnd: f64 = ops
        .sides
        .iter()
        .map(|s| sparse::weighted_dot(&s.h, &s.restrict(u), &sparse::matvec(&s.d, v)))
        .sum();
    let scale = [lap, gx, gy, bnd]
        .iter()
        .fold(0.0f64, |a, b| a.max(b.abs()));
    (lap + gx + gy - bnd).abs() / (1.0 + scale)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::mesh::CurvedEdge;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    pub(crate) fn unit_square() -> Block {
        Block::quad([0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0])
    }

    /// Radius `1 + xi`, angle `eta pi / 2`; the outer arc is the east side.
    pub(crate) fn quarter_annulus() -> Block {
        Block::new(
            CurvedEdge::line([1.0, 0.0], [2.0, 0.0]),
            CurvedEdge::arc([0.0, 0.0], 2.0, 0.0, FRAC_PI_2),
            CurvedEdge::line([0.0, 1.0], [0.0, 2.0]),
            CurvedEdge::arc([0.0, 0.0], 1.0, 0.0, FRAC_PI_2),
        )
    }

    fn build(block: &Block, p: usize) -> BlockOperators {
        let op = SbpOperator1D::gauss_lobatto(p).unwrap();
        let t = tensor_operators(&op);
        build_block_operators(0, block, &op, &t).unwrap()
    }

    fn sample(ops: &BlockOperators, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        ops.coords.iter().map(|p| f(p[0], p[1])).collect()
    }

    #[test]
    fn tensor_structure() {
        let op = SbpOperator1D::gauss_lobatto(1).unwrap();
        let t = tensor_operators(&op);
        let d = sparse::to_dense(&t.d_xi);
        // D1 = [[-1, 1], [-1, 1]] acting on the first factor.
        let expect = nalgebra::DMatrix::from_row_slice(
            4,
            4,
            &[
                -1.0, 0.0, 1.0, 0.0, //
                0.0, -1.0, 0.0, 1.0, //
                -1.0, 0.0, 1.0, 0.0, //
                0.0, -1.0, 0.0, 1.0,
            ],
        );
        assert_eq!(d, expect);

        let op = SbpOperator1D::gauss_lobatto(5).unwrap();
        let t = tensor_operators(&op);
        let comm = &(&t.d_xi * &t.d_eta) - &(&t.d_eta * &t.d_xi);
        assert!(sparse::max_abs(&comm) <= 1e-13);
        let g = block_grid(&unit_square(), &op);
        for i in t.side_indices(Side::West) {
            assert_eq!(g[i][0], 0.0);
        }
        assert_eq!(
            sparse::matvec(&t.selector(Side::East), &vec![1.0; 36]),
            vec![1.0; 6]
        );
    }

    #[test]
    fn identity_and_affine_metrics() {
        let ops = build(&unit_square(), 5);
        let m = &ops.metric;
        for i in 0..36 {
            assert!((m.jacobian[i] - 1.0).abs() < 1e-13);
            assert!((m.alpha1[i] - 1.0).abs() < 1e-13);
            assert!(m.beta[i].abs() < 1e-13);
            assert!((m.alpha2[i] - 1.0).abs() < 1e-13);
        }
        let dxi =
            sparse::to_dense(&tensor_operators(&SbpOperator1D::gauss_lobatto(5).unwrap()).d_xi);
        assert!((sparse::to_dense(&ops.dx) - dxi).amax() < 1e-12);

        let affine = Block::quad([0.0, 0.0], [2.0, 0.0], [2.0, 3.0], [0.0, 3.0]);
        let ops = build(&affine, 5);
        let m = &ops.metric;
        for i in 0..36 {
            assert!((m.jacobian[i] - 6.0).abs() < 1e-12);
            assert!((m.alpha1[i] - 9.0 / 6.0).abs() < 1e-12);
            assert!(m.beta[i].abs() < 1e-12);
            assert!((m.alpha2[i] - 4.0 / 6.0).abs() < 1e-12);
        }
        let x = sample(&ops, |x, _| x);
        assert!(sparse::matvec(&ops.dx, &x)
            .iter()
            .all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn rejects_inverted_mapping() {
        let flipped = Block::quad([0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]);
        let op = SbpOperator1D::gauss_lobatto(3).unwrap();
        let t = tensor_operators(&op);
        assert!(matches!(
            build_block_operators(4, &flipped, &op, &t),
            Err(Error::InvalidMapping { block: 4, .. })
        ));
    }

    #[test]
    fn polynomial_exactness_on_identity() {
        let ops = build(&unit_square(), 5);
        let q = sample(&ops, |x, y| x * x + y * y);
        assert!(sparse::matvec(&ops.laplace, &q)
            .iter()
            .all(|v| (v - 4.0).abs() < 1e-10));
        let h = sample(&ops, |x, y| x * x - y * y);
        assert!(sparse::matvec(&ops.laplace, &h)
            .iter()
            .all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn annulus_jacobian_matches_polar_map() {
        // The Coons map is exactly polar here, so J = (pi/2) r.
        let op = SbpOperator1D::gauss_lobatto(9).unwrap();
        let t = tensor_operators(&op);
        let ops = build_block_operators(0, &quarter_annulus(), &op, &t).unwrap();
        for (i, p) in ops.coords.iter().enumerate() {
            let r = p[0].hypot(p[1]);
            assert!((ops.metric.jacobian[i] - FRAC_PI_2 * r).abs() < 1e-6, "{i}");
        }
    }

    #[test]
    fn curved_block_gradient_exactness() {
        // The Coons map of the quarter annulus is not polynomial, so exactness
        // holds only to interpolation accuracy of the angular map.
        let ops = build(&quarter_annulus(), 9);
        let f = sample(&ops, |x, y| x * x * y - 2.0 * x * y * y + y);
        let fx = sparse::matvec(&ops.dx, &f);
        let fy = sparse::matvec(&ops.dy, &f);
        for (i, p) in ops.coords.iter().enumerate() {
            let (x, y) = (p[0], p[1]);
            assert!((fx[i] - (2.0 * x * y - 2.0 * y * y)).abs() < 1e-3);
            assert!((fy[i] - (x * x - 4.0 * x * y + 1.0)).abs() < 1e-3);
        }
    }

    #[test]
    fn curved_block_differentiates_coordinates_exactly() {
        let ops = build(&quarter_annulus(), 5);
        let x: Vec<f64> = ops.coords.iter().map(|p| p[0]).collect();
        let y: Vec<f64> = ops.coords.iter().map(|p| p[1]).collect();
        for (m, f, expect) in [
            (&ops.dx, &x, 1.0),
            (&ops.dx, &y, 0.0),
            (&ops.dy, &x, 0.0),
            (&ops.dy, &y, 1.0),
        ] {
            assert!(sparse::matvec(m, f)
                .iter()
                .all(|v| (v - expect).abs() < 1e-12));
        }
    }

    #[test]
    fn normals() {
        let ops = build(&unit_square(), 5);
        let s = ops.side(Side::South);
        assert!(s.normal_x.iter().all(|v| v.abs() < 1e-14));
        assert!(s.normal_y.iter().all(|v| (v + 1.0).abs() < 1e-14));
        // d_n = e_n Dy
        let north = ops.side(Side::North);
        let dy = sparse::to_dense(&ops.dy);
        let dn = sparse::to_dense(&north.d);
        for (k, &i) in north.indices.iter().enumerate() {
            assert!((dn.row(k) - dy.row(i)).amax() < 1e-12);
        }

        // The angular derivative of the map is only approximated.
        let ops = build(&quarter_annulus(), 9);
        let outer = ops.side(Side::East);
        for (k, &i) in outer.indices.iter().enumerate() {
            let p = ops.coords[i];
            let r = p[0].hypot(p[1]);
            assert!((outer.normal_x[k] - p[0] / r).abs() < 1e-4);
            assert!((outer.normal_y[k] - p[1] / r).abs() < 1e-4);
        }
        for side in &ops.sides {
            for k in 0..side.h.len() {
                assert!((side.normal_x[k].hypot(side.normal_y[k]) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normal_derivative_annihilates_constants() {
        let ops = build(&quarter_annulus(), 7);
        let ones = vec![1.0; ops.coords.len()];
        for side in &ops.sides {
            assert!(sparse::matvec(&side.d, &ones)
                .iter()
                .all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn green_identity_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for block in [unit_square(), quarter_annulus()] {
            let ops = build(&block, 5);
            for _ in 0..20 {
                let u: Vec<f64> = (0..36).map(|_| rng.random_range(-1.0..1.0)).collect();
                let v: Vec<f64> = (0..36).map(|_| rng.random_range(-1.0..1.0)).collect();
                assert!(green_residual_block(&ops, &u, &v) <= 1e-10);
                assert!(green_residual_block(&ops, &u, &u) <= 1e-10);
            }
        }
    }
}
