//! One-dimensional Gauss-Lobatto SBP operators on the reference interval `[0, 1]`.
//!
//! An operator of order `p` lives on `n = p + 1` Gauss-Lobatto nodes. Its
//! differentiation matrix is the exact derivative of the Lagrange interpolant
//! through the nodes, and its norm is the diagonal matrix of Lobatto weights.
//! Because Lobatto quadrature integrates polynomials of degree `2n - 3`
//! exactly, the pair satisfies `H D1 + D1^T H = e_r e_r^T - e_l e_l^T`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const NEWTON_MAX_ITER: usize = 100;

/// Orders exercised by the verification suite and the experiments.
pub const SUPPORTED_ORDERS: [usize; 3] = [5, 7, 9];

/// Evaluate the Legendre polynomial `P_k` and its derivative at `x`.
fn legendre_and_derivative(k: usize, x: f64) -> (f64, f64) {
    if k == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    let (mut dp_prev, mut dp) = (0.0, 1.0);
    for j in 2..=k {
        let jf = j as f64;
        let p_next = ((2.0 * jf - 1.0) * x * p - (jf - 1.0) * p_prev) / jf;
        // P'_j = P'_{j-2} + (2j - 1) P_{j-1}
        let dp_next = dp_prev + (2.0 * jf - 1.0) * p;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
    }
    (p, dp)
}

/// Gauss-Lobatto nodes and weights mapped to `[0, 1]`.
///
/// Interior nodes are the roots of `P'_{n-1}`, found by Newton iteration from
/// Chebyshev-Lobatto initial guesses. Weights are `2 / (N (N + 1) P_N(x)^2)`
/// on `[-1, 1]`, halved by the affine map. The result is symmetric about
/// `1/2` by construction.
pub fn lobatto_nodes_weights(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "Gauss-Lobatto rule needs at least 2 nodes, got {n}"
        )));
    }
    let deg = n - 1;
    let scale = (deg * (deg + 1)) as f64;

    // Reference nodes on [-1, 1]; only the left half is solved for.
    let mut x = vec![0.0; n];
    x[0] = -1.0;
    x[n - 1] = 1.0;
    for j in 1..n / 2 {
        let mut xj = -(std::f64::consts::PI * j as f64 / deg as f64).cos();
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, dp) = legendre_and_derivative(deg, xj);
            // Newton on (1 - x^2) P'_N, whose derivative is -N (N + 1) P_N.
            let update = (1.0 - xj * xj) * dp / (scale * p);
            xj += update;
            if update.abs() <= 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Internal(format!(
                "Newton iteration for Gauss-Lobatto node {j} of {n} did not converge"
            )));
        }
        x[j] = xj;
        x[n - 1 - j] = -xj;
    }

    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for j in 0..n.div_ceil(2) {
        let (p, _) = legendre_and_derivative(deg, x[j]);
        let w = 1.0 / (scale * p * p);
        let t = if j == 0 { 0.0 } else { 0.5 * (1.0 + x[j]) };
        nodes[j] = t;
        weights[j] = w;
        nodes[n - 1 - j] = 1.0 - t;
        weights[n - 1 - j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.5;
    }
    Ok((nodes, weights))
}

/// Differentiation matrix of the Lagrange interpolant through `nodes`.
///
/// Off-diagonal entries use barycentric weights; diagonal entries are the
/// negative row sums so that constants are annihilated to rounding.
pub fn derivative_matrix(nodes: &[f64]) -> Result<DMatrix<f64>> {
    let n = nodes.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "differentiation matrix needs at least 2 nodes".into(),
        ));
    }
    if let Some(w) = nodes.windows(2).find(|w| w[1] <= w[0] || !w[0].is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "nodes must be distinct and ascending, found {} followed by {}",
            w[0], w[1]
        )));
    }
    let bary: Vec<f64> = (0..n)
        .map(|j| {
            let prod: f64 = (0..n)
                .filter(|&k| k != j)
                .map(|k| nodes[j] - nodes[k])
                .product();
            1.0 / prod
        })
        .collect();

    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = bary[j] / bary[i] / (nodes[i] - nodes[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    Ok(d)
}

/// A first-derivative SBP operator on Gauss-Lobatto nodes in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct SbpOperator1D {
    p: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    d1: DMatrix<f64>,
}

impl SbpOperator1D {
    /// Order-`p` operator on `p + 1` Gauss-Lobatto nodes.
    pub fn gauss_lobatto(p: usize) -> Result<Self> {
        if p < 1 {
            return Err(Error::InvalidArgument(format!(
                "operator order must be at least 1, got {p}"
            )));
        }
        let (nodes, weights) = lobatto_nodes_weights(p + 1)?;
        let d1 = derivative_matrix(&nodes)?;
        Ok(Self {
            p,
            nodes,
            weights,
            d1,
        })
    }

    /// Assemble an operator from explicit parts. No SBP check is made; use
    /// [`sbp_residual`] to verify.
    pub fn from_parts(
        p: usize,
        nodes: Vec<f64>,
        weights: Vec<f64>,
        d1: DMatrix<f64>,
    ) -> Result<Self> {
        let n = nodes.len();
        if weights.len() != n || d1.nrows() != n || d1.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "inconsistent operator sizes: {} nodes, {} weights, {}x{} matrix",
                n,
                weights.len(),
                d1.nrows(),
                d1.ncols()
            )));
        }
        if n < 2 {
            return Err(Error::InvalidArgument(
                "operator needs at least 2 nodes".into(),
            ));
        }
        Ok(Self {
            p,
            nodes,
            weights,
            d1,
        })
    }

    pub fn order(&self) -> usize {
        self.p
    }

    /// Node count `n`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Diagonal of the norm matrix `H`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn d1(&self) -> &DMatrix<f64> {
        &self.d1
    }

    /// Copy with one quadrature weight scaled by `1 + rel`. Only useful for
    /// exercising failure paths.
    pub fn with_perturbed_weight(&self, index: usize, rel: f64) -> Self {
        let mut out = self.clone();
        out.weights[index] *= 1.0 + rel;
        out
    }

    /// `D1 diag(b) D1`, approximating `d/dx (b d/dx)`.
    pub fn second_derivative_variable(&self, b: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.len();
        if b.len() != n {
            return Err(Error::InvalidArgument(format!(
                "coefficient vector has length {}, operator has {n} nodes",
                b.len()
            )));
        }
        let mut scaled = self.d1.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= b[i];
        }
        Ok(&self.d1 * scaled)
    }
}

/// Max-norm of `H D1 + D1^T H + e_l e_l^T - e_r e_r^T`.
pub fn sbp_residual(op: &SbpOperator1D) -> f64 {
    let n = op.len();
    let h = op.weights();
    let d = op.d1();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut q = h[i] * d[(i, j)] + d[(j, i)] * h[j];
            if i == j && i == 0 {
                q += 1.0;
            }
            if i == j && i == n - 1 {
                q -= 1.0;
            }
            worst = worst.max(q.abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn two_and_three_point_rules() {
        let (x, w) = lobatto_nodes_weights(2).unwrap();
        assert_eq!(x, vec![0.0, 1.0]);
        assert_eq!(w, vec![0.5, 0.5]);

        // Exact integration of 1, x, x^2 on {0, 1/2, 1} gives Simpson's rule.
        let (x, w) = lobatto_nodes_weights(3).unwrap();
        assert!(max_abs_diff(&x, &[0.0, 0.5, 1.0]) < 1e-15);
        assert!(max_abs_diff(&w, &[1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]) < 1e-15);
    }

    #[test]
    fn rejects_too_few_nodes() {
        assert!(matches!(
            lobatto_nodes_weights(1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            lobatto_nodes_weights(0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn newton_converges_up_to_64_nodes() {
        for n in 2..=64 {
            let (x, w) = lobatto_nodes_weights(n).unwrap();
            assert!(x.windows(2).all(|p| p[1] > p[0]), "n = {n}");
            assert!(w.iter().all(|&v| v > 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn quadrature_exactness_six_nodes() {
        let (x, w) = lobatto_nodes_weights(6).unwrap();
        for k in 0..=9 {
            let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k)).sum();
            assert!((q - 1.0 / (k as f64 + 1.0)).abs() <= 1e-14, "k = {k}");
        }
    }

    #[test]
    fn derivative_matrix_small_cases() {
        let d = derivative_matrix(&[0.0, 1.0]).unwrap();
        assert_eq!(d, DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, -1.0, 1.0]));

        // Hand-differentiated quadratic Lagrange basis on {0, 1/2, 1}.
        let d = derivative_matrix(&[0.0, 0.5, 1.0]).unwrap();
        let expect =
            DMatrix::from_row_slice(3, 3, &[-3.0, 4.0, -1.0, -1.0, 0.0, 1.0, 1.0, -4.0, 3.0]);
        assert!((d - expect).amax() < 1e-14);
    }

    #[test]
    fn derivative_matrix_rejects_duplicates() {
        assert!(derivative_matrix(&[0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(derivative_matrix(&[0.0, 0.7, 0.3]).is_err());
    }

    #[test]
    fn sbp_residual_bounds() {
        let op5 = SbpOperator1D::gauss_lobatto(5).unwrap();
        assert!(sbp_residual(&op5) <= 1e-13);
        let op9 = SbpOperator1D::gauss_lobatto(9).unwrap();
        assert!(sbp_residual(&op9) <= 1e-12);
        let bad = op5.with_perturbed_weight(2, 1e-3);
        assert!(sbp_residual(&bad) > 1e-6);
    }

    #[test]
    fn second_derivative_examples() {
        let op = SbpOperator1D::gauss_lobatto(5).unwrap();
        let x = op.nodes();
        let ones = vec![1.0; op.len()];
        let sq: Vec<f64> = x.iter().map(|v| v * v).collect();

        let d2 = op.second_derivative_variable(&ones).unwrap();
        let out = &d2 * nalgebra::DVector::from_column_slice(&sq);
        assert!(out.iter().all(|v| (v - 2.0).abs() < 1e-12));
        let plain = op.d1() * op.d1();
        assert!((&d2 - &plain).amax() <= 1e-15);

        // (x (x^2)')' = 4x
        let d2 = op.second_derivative_variable(x).unwrap();
        let out = &d2 * nalgebra::DVector::from_column_slice(&sq);
        for (o, xi) in out.iter().zip(x) {
            assert!((o - 4.0 * xi).abs() < 1e-12);
        }

        let zero = op.second_derivative_variable(&vec![0.0; op.len()]).unwrap();
        assert_eq!(zero.amax(), 0.0);

        assert!(op.second_derivative_variable(&[1.0, 2.0]).is_err());
    }
}
