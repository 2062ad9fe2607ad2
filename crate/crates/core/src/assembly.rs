//! Global assembly on the duplicate-free grid.
//!
//! Block operators are stacked block-diagonally on the non-reduced grid
//! (every block keeps its own copy of interface nodes). Continuity of the
//! normal derivative across interfaces is imposed with a penalty on one side
//! of each interface, then the embedding `E` (a 0/1 matrix mapping reduced
//! to non-reduced node values) yields
//!
//! ```text
//! H     = E^T H+ E
//! D_L   = H^-1 E^T H+ D~L+ E
//! ```
//!
//! which satisfies a discrete Green identity with boundary terms only on the
//! physical boundary.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use sprs::CsMat;

use crate::error::{Error, Result};
use crate::geometry::{build_block_operators, tensor_operators, BlockOperators, TensorOperators};
use crate::mesh::{validate_mesh, MultiblockMesh, Side, SideRef, INTERFACE_TOL};
use crate::sbp1d::SbpOperator1D;
use crate::sparse::{self, SpMat};

/// Tolerance for the equality of the two boundary quadratures at an
/// interface.
pub const INTERFACE_QUADRATURE_TOL: f64 = 1e-12;

/// Maps reduced (unique) node values to the stacked per-block grid.
#[derive(Debug, Clone)]
pub struct EmbeddingOperator {
    /// `N x N^` with exactly one unit entry per row.
    pub matrix: SpMat,
    /// Non-reduced global index to reduced index.
    pub row_map: Vec<usize>,
    /// Reduced index to its canonical (smallest) non-reduced index.
    pub canonical: Vec<usize>,
    /// Coordinates of the unique nodes.
    pub reduced_coords: Vec<[f64; 2]>,
}

impl EmbeddingOperator {
    pub fn n_full(&self) -> usize {
        self.row_map.len()
    }

    pub fn n_reduced(&self) -> usize {
        self.canonical.len()
    }

    /// `E u`
    pub fn embed(&self, u: &[f64]) -> Vec<f64> {
        self.row_map.iter().map(|&r| u[r]).collect()
    }

    /// Pick the canonical copy of every unique node from a non-reduced field.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.canonical.iter().map(|&g| full[g]).collect()
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        // Keep the smaller index as root so roots are canonical.
        if ra < rb {
            self.parent[rb] = ra;
        } else if rb < ra {
            self.parent[ra] = rb;
        }
    }
}

/// Identify duplicated interface nodes from connectivity alone and build
/// `E`. Matched nodes are cross-checked geometrically.
pub fn build_embedding(
    mesh: &MultiblockMesh,
    grids: &[Vec<[f64; 2]>],
    n: usize,
) -> Result<EmbeddingOperator> {
    let per_block = n * n;
    let total = grids.len() * per_block;
    if grids.len() != mesh.num_blocks() || grids.iter().any(|g| g.len() != per_block) {
        return Err(Error::InvalidArgument(format!(
            "expected {} block grids of {per_block} points",
            mesh.num_blocks()
        )));
    }
    let mut uf = UnionFind::new(total);
    for itf in &mesh.interfaces {
        let (a, b) = (itf.a, itf.b);
        for k in 0..n {
            let ga = a.0 * per_block + a.1.node_index(n, k);
            let gb = b.0 * per_block + b.1.node_index(n, itf.orientation.map(n, k));
            uf.union(ga, gb);
        }
    }
    let point = |g: usize| grids[g / per_block][g % per_block];

    let mut row_map = vec![usize::MAX; total];
    let mut canonical = Vec::new();
    for g in 0..total {
        let root = uf.find(g);
        if root == g {
            row_map[g] = canonical.len();
            canonical.push(g);
        } else {
            // Roots are the smallest member, so they were numbered already.
            row_map[g] = row_map[root];
            let (p, q) = (point(g), point(root));
            let gap = (p[0] - q[0]).hypot(p[1] - q[1]);
            if !(gap <= INTERFACE_TOL) {
                return Err(Error::InconsistentMesh(format!(
                    "node {} of block {} is matched to node {} of block {} but they are {gap:e} apart",
                    g % per_block,
                    g / per_block,
                    root % per_block,
                    root / per_block
                )));
            }
        }
    }
    let reduced_coords = canonical.iter().map(|&g| point(g)).collect();
    let matrix = CsMat::new(
        (total, canonical.len()),
        (0..=total).collect(),
        row_map.clone(),
        vec![1.0; total],
    );
    Ok(EmbeddingOperator {
        matrix,
        row_map,
        canonical,
        reduced_coords,
    })
}

/// Stack square per-block matrices on the diagonal.
fn block_diagonal<'a>(mats: impl Iterator<Item = &'a SpMat>, size: usize) -> SpMat {
    let mut indptr = vec![0usize];
    let mut indices = Vec::new();
    let mut data = Vec::new();
    let mut offset = 0;
    for m in mats {
        let ip = m.indptr();
        let ip = ip.raw_storage();
        for r in 0..m.rows() {
            for k in ip[r]..ip[r + 1] {
                indices.push(m.indices()[k] + offset);
                data.push(m.data()[k]);
            }
            indptr.push(indices.len());
        }
        offset += m.cols();
    }
    CsMat::new((size, size), indptr, indices, data)
}

/// Physical-boundary operators for one tag, acting on reduced vectors.
#[derive(Debug, Clone)]
pub struct BoundaryStack {
    /// `(block, side, node)` of every row, ascending.
    pub rows: Vec<(usize, Side, usize)>,
    /// Reduced index selected by each row of `e`.
    pub reduced_index: Vec<usize>,
    /// `[e_k; ...] E`
    pub e: SpMat,
    /// `[d_k; ...] E`
    pub d: SpMat,
    /// Diagonal of the stacked boundary quadrature.
    pub h: Vec<f64>,
}

impl BoundaryStack {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `<e u, d v>_H`
    pub fn flux(&self, u: &[f64], v: &[f64]) -> f64 {
        let dv = sparse::matvec(&self.d, v);
        self.reduced_index
            .iter()
            .zip(&self.h)
            .zip(&dv)
            .map(|((&r, &h), &d)| h * u[r] * d)
            .sum()
    }
}

/// Non-reduced and reduced global operators.
#[derive(Debug, Clone)]
pub struct GlobalOperators {
    pub h_plus: Vec<f64>,
    pub dl_plus: SpMat,
    pub dx_plus: SpMat,
    pub dy_plus: SpMat,
    /// `D_L+` with interface penalties.
    pub dl_tilde_plus: SpMat,
    pub h_reduced: Vec<f64>,
    pub dl_reduced: SpMat,
    pub boundaries: BTreeMap<String, BoundaryStack>,
}

/// `D~L+ = D_L+ - (H+)^-1 sum_I e_o^T H_o (d_o + d_nb)` over all interfaces,
/// with the owner `o` being the smaller `(block, side)` pair.
pub fn assemble_interface_sats(
    mesh: &MultiblockMesh,
    blocks: &[BlockOperators],
    h_plus: &[f64],
    dl_plus: &SpMat,
) -> Result<SpMat> {
    let n = blocks.first().map_or(0, |b| b.n);
    let per_block = n * n;
    let mut entries = Vec::new();
    for itf in &mesh.interfaces {
        let ((ob, os), (nb, ns)) = itf.owner_and_neighbor();
        let owner = &blocks[ob];
        let neigh = &blocks[nb];
        let (o_ops, n_ops) = (owner.side(os), neigh.side(ns));
        for k in 0..n {
            let kn = itf.orientation.map(n, k);
            let (po, pn) = (
                owner.coords[o_ops.indices[k]],
                neigh.coords[n_ops.indices[kn]],
            );
            let gap = (po[0] - pn[0]).hypot(po[1] - pn[1]);
            let (ho, hn) = (o_ops.h[k], n_ops.h[kn]);
            if !(gap <= INTERFACE_TOL)
                || !((ho - hn).abs() <= INTERFACE_QUADRATURE_TOL * ho.abs().max(1.0))
            {
                return Err(Error::Unsupported(format!(
                    "non-conforming interface between block {ob} side {os} and block {nb} side {ns}: \
                     node {k} differs by {gap:e} in position and {:e} in boundary quadrature",
                    (ho - hn).abs()
                )));
            }
            let row = ob * per_block + o_ops.indices[k];
            let scale = ho / h_plus[row];
            for (ops, b, kk) in [(o_ops, ob, k), (n_ops, nb, kn)] {
                let d_row = ops.d.outer_view(kk).expect("side row");
                for (j, &v) in d_row.iter() {
                    entries.push((row, b * per_block + j, scale * v));
                }
            }
        }
    }
    let size = dl_plus.rows();
    let sat = sparse::from_triplets(size, size, &entries);
    Ok(dl_plus - &sat)
}

/// `H = E^T H+ E` and `D_L = H^-1 E^T H+ D~L+ E`, evaluated through the row
/// map of `E`.
pub fn assemble_reduced(
    e: &EmbeddingOperator,
    h_plus: &[f64],
    dl_tilde_plus: &SpMat,
) -> (Vec<f64>, SpMat) {
    let nr = e.n_reduced();
    let mut h = vec![0.0; nr];
    for (g, &r) in e.row_map.iter().enumerate() {
        h[r] += h_plus[g];
    }
    let mut entries = Vec::with_capacity(dl_tilde_plus.nnz());
    let ip = dl_tilde_plus.indptr();
    let ip = ip.raw_storage();
    for i in 0..dl_tilde_plus.rows() {
        let r = e.row_map[i];
        let w = h_plus[i] / h[r];
        for k in ip[i]..ip[i + 1] {
            let c = e.row_map[dl_tilde_plus.indices()[k]];
            entries.push((r, c, w * dl_tilde_plus.data()[k]));
        }
    }
    (h, sparse::from_triplets(nr, nr, &entries))
}

/// Stack `e_k E`, `d_k E` and `H_k` per boundary tag.
pub fn stack_boundary_operators(
    mesh: &MultiblockMesh,
    blocks: &[BlockOperators],
    e: &EmbeddingOperator,
) -> Result<BTreeMap<String, BoundaryStack>> {
    let mut on_interface: BTreeSet<SideRef> = BTreeSet::new();
    for itf in &mesh.interfaces {
        on_interface.insert(itf.a);
        on_interface.insert(itf.b);
    }
    for b in 0..mesh.num_blocks() {
        for side in Side::ALL {
            if !on_interface.contains(&(b, side)) && !mesh.boundaries.contains_key(&(b, side)) {
                return Err(Error::Configuration(format!(
                    "block {b} side {side} is on the physical boundary but has no tag"
                )));
            }
        }
    }

    let n = blocks.first().map_or(0, |b| b.n);
    let per_block = n * n;
    let nr = e.n_reduced();
    let mut grouped: BTreeMap<String, Vec<SideRef>> = BTreeMap::new();
    for (&key, tag) in &mesh.boundaries {
        grouped.entry(tag.clone()).or_default().push(key);
    }
    let mut out = BTreeMap::new();
    for (tag, sides) in grouped {
        let mut rows = Vec::new();
        let mut reduced_index = Vec::new();
        let mut e_entries = Vec::new();
        let mut d_entries = Vec::new();
        let mut h = Vec::new();
        for (b, side) in sides {
            let ops = blocks[b].side(side);
            for k in 0..n {
                let row = rows.len();
                let r = e.row_map[b * per_block + ops.indices[k]];
                rows.push((b, side, k));
                reduced_index.push(r);
                e_entries.push((row, r, 1.0));
                h.push(ops.h[k]);
                let d_row = ops.d.outer_view(k).expect("side row");
                for (j, &v) in d_row.iter() {
                    d_entries.push((row, e.row_map[b * per_block + j], v));
                }
            }
        }
        let m = rows.len();
        out.insert(
            tag,
            BoundaryStack {
                rows,
                reduced_index,
                e: sparse::from_triplets(m, nr, &e_entries),
                d: sparse::from_triplets(m, nr, &d_entries),
                h,
            },
        );
    }
    Ok(out)
}

/// The assembled scheme for one mesh and one operator order.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: MultiblockMesh,
    pub op: SbpOperator1D,
    pub tensor: TensorOperators,
    pub blocks: Vec<BlockOperators>,
    pub embedding: EmbeddingOperator,
    pub global: GlobalOperators,
}

impl Discretization {
    /// Validate the mesh, build every block, and assemble the reduced
    /// operators: ordering and embedding, non-reduced operators, interface
    /// penalties, reduced norm, reduced Laplacian.
    pub fn new(mesh: MultiblockMesh, op: SbpOperator1D) -> Result<Self> {
        let violations = validate_mesh(&mesh);
        if !violations.is_empty() {
            return Err(Error::InvalidMesh(violations));
        }
        let tensor = tensor_operators(&op);
        let blocks: Vec<BlockOperators> = mesh
            .blocks
            .par_iter()
            .enumerate()
            .map(|(i, b)| build_block_operators(i, b, &op, &tensor))
            .collect::<Result<_>>()?;
        let n = op.len();
        let grids: Vec<Vec<[f64; 2]>> = blocks.iter().map(|b| b.coords.clone()).collect();
        let embedding = build_embedding(&mesh, &grids, n)?;

        let size = embedding.n_full();
        let h_plus: Vec<f64> = blocks.iter().flat_map(|b| b.h.iter().copied()).collect();
        let dl_plus = block_diagonal(blocks.iter().map(|b| &b.laplace), size);
        let dx_plus = block_diagonal(blocks.iter().map(|b| &b.dx), size);
        let dy_plus = block_diagonal(blocks.iter().map(|b| &b.dy), size);
        let boundaries = stack_boundary_operators(&mesh, &blocks, &embedding)?;

        let dl_tilde_plus = assemble_interface_sats(&mesh, &blocks, &h_plus, &dl_plus)?;
        let (h_reduced, dl_reduced) = assemble_reduced(&embedding, &h_plus, &dl_tilde_plus);

        Ok(Self {
            mesh,
            op,
            tensor,
            blocks,
            embedding,
            global: GlobalOperators {
                h_plus,
                dl_plus,
                dx_plus,
                dy_plus,
                dl_tilde_plus,
                h_reduced,
                dl_reduced,
                boundaries,
            },
        })
    }

    pub fn n_reduced(&self) -> usize {
        self.embedding.n_reduced()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.embedding.reduced_coords
    }

    /// Sample a function at the unique grid points.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.coords().iter().map(|p| f(p[0], p[1])).collect()
    }

    pub fn green_residual(&self, u: &[f64], v: &[f64]) -> f64 {
        green_residual_global(&self.global, &self.embedding, u, v)
    }
}

/// Relative residual of the global Green identity
/// `(u, D_L v)_H + (Dx+ E u, Dx+ E v)_H+ + (Dy+ E u, Dy+ E v)_H+ - sum_t <e_t u, d_t v>_{H_t}`.
pub fn green_residual_global(
    ops: &GlobalOperators,
    e: &EmbeddingOperator,
    u: &[f64],
    v: &[f64],
) -> f64 {
    let lap = sparse::weighted_dot(&ops.h_reduced, u, &sparse::matvec(&ops.dl_reduced, v));
    let (eu, ev) = (e.embed(u), e.embed(v));
    let gx = sparse::weighted_dot(
        &ops.h_plus,
        &sparse::matvec(&ops.dx_plus, &eu),
        &sparse::matvec(&ops.dx_plus, &ev),
    );
    let gy = sparse::weighted_dot(
        &ops.h_plus,
        &sparse::matvec(&ops.dy_plus, &eu),
        &sparse::matvec(&ops.dy_plus, &ev),
    );
    let bnd: f64 = ops.boundaries.values().map(|b| b.flux(u, v)).sum();
    let scale = [lap, gx, gy, bnd]
        .iter()
        .fold(0.0f64, |a, b| a.max(b.abs()));
    (lap + gx + gy - bnd).abs() / (1.0 + scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_circle_mesh, generate_rectangle_mesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disc(mesh: MultiblockMesh, p: usize) -> Discretization {
        Discretization::new(mesh, SbpOperator1D::gauss_lobatto(p).unwrap()).unwrap()
    }

    fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn embedding_counts() {
        let d = disc(
            generate_rectangle_mesh(1, 1, [0.0, 1.0], [0.0, 1.0], "b"),
            5,
        );
        assert_eq!((d.embedding.n_full(), d.n_reduced()), (36, 36));
        assert_eq!(
            sparse::to_dense(&d.embedding.matrix),
            nalgebra::DMatrix::identity(36, 36)
        );

        let d = disc(
            generate_rectangle_mesh(2, 1, [0.0, 2.0], [0.0, 1.0], "b"),
            5,
        );
        assert_eq!((d.embedding.n_full(), d.n_reduced()), (72, 66));

        let d = disc(
            generate_rectangle_mesh(2, 2, [0.0, 1.0], [0.0, 1.0], "b"),
            5,
        );
        assert_eq!((d.embedding.n_full(), d.n_reduced()), (144, 121));
        // S = E S^
        let e = &d.embedding;
        for (g, &r) in e.row_map.iter().enumerate() {
            let p = d.blocks[g / 36].coords[g % 36];
            let q = e.reduced_coords[r];
            assert!((p[0] - q[0]).abs() <= 1e-10 && (p[1] - q[1]).abs() <= 1e-10);
        }
        // One unit per row, every column used.
        let mut used = vec![0; e.n_reduced()];
        for (&v, (_, c)) in e.matrix.iter() {
            assert_eq!(v, 1.0);
            used[c] += 1;
        }
        assert!(used.iter().all(|&c| c >= 1));
        assert_eq!(e.matrix.nnz(), e.n_full());
    }

    #[test]
    fn embedding_rejects_bad_geometry() {
        let mesh = generate_rectangle_mesh(2, 1, [0.0, 2.0], [0.0, 1.0], "b");
        let op = SbpOperator1D::gauss_lobatto(3).unwrap();
        let mut grids: Vec<Vec<[f64; 2]>> = mesh
            .blocks
            .iter()
            .map(|b| crate::mesh::block_grid(b, &op))
            .collect();
        grids[1][1][1] += 1e-6; // a west-side node of block 1
        assert!(matches!(
            build_embedding(&mesh, &grids, 4),
            Err(Error::InconsistentMesh(_))
        ));
    }

    #[test]
    fn single_block_reduces_to_block_operator() {
        let d = disc(
            generate_rectangle_mesh(1, 1, [0.0, 1.0], [0.0, 1.0], "b"),
            5,
        );
        let a = sparse::to_dense(&d.global.dl_reduced);
        let b = sparse::to_dense(&d.blocks[0].laplace);
        assert!((a - b).amax() < 1e-12);
        let t = sparse::to_dense(&d.global.dl_tilde_plus);
        assert_eq!(t, sparse::to_dense(&d.global.dl_plus));
    }

    #[test]
    fn reduced_operator_matches_explicit_products() {
        let d = disc(generate_circle_mesh(1, "outer"), 5);
        let g = &d.global;
        let e = &d.embedding.matrix;
        let et = e.transpose_view().to_csr();
        let hp = sparse::diag(&g.h_plus);
        let h_explicit = &(&et * &hp) * e;
        let hr = sparse::to_dense(&h_explicit);
        for (r, &h) in g.h_reduced.iter().enumerate() {
            assert!((hr[(r, r)] - h).abs() <= 1e-15 * h.max(1.0));
        }
        let inner = &(&(&et * &hp) * &g.dl_tilde_plus) * e;
        let hinv: Vec<f64> = g.h_reduced.iter().map(|h| 1.0 / h).collect();
        let explicit = sparse::scale_rows(&inner, &hinv);
        let diff = &explicit - &g.dl_reduced;
        assert!(sparse::max_abs(&diff) <= 1e-10 * sparse::max_abs(&g.dl_reduced));
    }

    #[test]
    fn interface_penalty_vanishes_on_constants() {
        let d = disc(generate_circle_mesh(1, "outer"), 5);
        let ones = vec![1.0; d.embedding.n_full()];
        let sat = &d.global.dl_plus - &d.global.dl_tilde_plus;
        assert!(sparse::matvec(&sat, &ones).iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn interface_penalty_small_for_smooth_field() {
        // The penalty approximates the jump in normal derivative, which is
        // zero for a globally smooth field.
        let d = disc(
            generate_rectangle_mesh(2, 1, [0.0, 2.0], [0.0, 1.0], "b"),
            5,
        );
        let f = |x: f64, y: f64| (1.3 * x).sin() * (0.7 * y).cos();
        let v = d.embedding.embed(&d.sample(f));
        let sat = &d.global.dl_plus - &d.global.dl_tilde_plus;
        let r = sparse::matvec(&sat, &v);
        let worst = r.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(worst < 1e-2, "{worst}");
    }

    #[test]
    fn reduced_laplacian_polynomial_exactness() {
        let d = disc(
            generate_rectangle_mesh(2, 1, [0.0, 2.0], [0.0, 1.0], "b"),
            5,
        );
        let v = d.sample(|x, y| x * x + y * y);
        let out = sparse::matvec(&d.global.dl_reduced, &v);
        for (r, p) in d.coords().iter().enumerate() {
            let interior = p[0] > 1e-12 && p[0] < 2.0 - 1e-12 && p[1] > 1e-12 && p[1] < 1.0 - 1e-12;
            if interior {
                assert!((out[r] - 4.0).abs() < 1e-9, "{p:?}: {}", out[r]);
            }
        }
    }

    #[test]
    fn reduced_norm_integrates_area() {
        let d = disc(
            generate_rectangle_mesh(2, 2, [0.0, 1.0], [0.0, 2.0], "b"),
            5,
        );
        assert!((d.global.h_reduced.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        let d = disc(generate_circle_mesh(2, "outer"), 5);
        let area: f64 = d.global.h_reduced.iter().sum();
        assert!((area - std::f64::consts::PI).abs() <= 1e-6, "{area}");
    }

    #[test]
    fn boundary_stacks() {
        let d = disc(generate_circle_mesh(1, "outer"), 5);
        let b = &d.global.boundaries["outer"];
        assert_eq!(b.len(), 8 * 6);
        let ones = vec![1.0; d.n_reduced()];
        assert!(sparse::matvec(&b.d, &ones).iter().all(|v| v.abs() < 1e-12));
        assert!(b.rows.windows(2).all(|w| w[0] < w[1]));

        let mut m = generate_rectangle_mesh(1, 1, [0.0, 1.0], [0.0, 1.0], "wall");
        m.boundaries.insert((0, Side::North), "top".into());
        let d = disc(m, 5);
        let top = &d.global.boundaries["top"];
        let dn = sparse::to_dense(&top.d);
        let dy = sparse::to_dense(&d.blocks[0].dy);
        for (k, &i) in Side::North.node_indices(6).iter().enumerate() {
            assert!((dn.row(k) - dy.row(i)).amax() < 1e-12);
        }
    }

    #[test]
    fn untagged_side_is_a_configuration_error() {
        let mut m = generate_rectangle_mesh(1, 1, [0.0, 1.0], [0.0, 1.0], "wall");
        m.boundaries.remove(&(0, Side::North));
        let op = SbpOperator1D::gauss_lobatto(3).unwrap();
        let t = tensor_operators(&op);
        let blocks = vec![build_block_operators(0, &m.blocks[0], &op, &t).unwrap()];
        let e = build_embedding(&m, &[blocks[0].coords.clone()], 4).unwrap();
        assert!(matches!(
            stack_boundary_operators(&m, &blocks, &e),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn global_green_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for mesh in [
            generate_rectangle_mesh(2, 1, [0.0, 2.0], [0.0, 1.0], "b"),
            generate_rectangle_mesh(2, 2, [0.0, 1.0], [0.0, 1.0], "b"),
            generate_circle_mesh(1, "outer"),
        ] {
            let d = disc(mesh, 5);
            for _ in 0..10 {
                let u = random(&mut rng, d.n_reduced());
                let v = random(&mut rng, d.n_reduced());
                assert!(d.green_residual(&u, &v) <= 1e-10);
            }
        }
    }

    #[test]
    fn interior_support_has_no_boundary_flux() {
        let d = disc(generate_circle_mesh(1, "outer"), 5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let near_edge = |p: &[f64; 2]| p[0].hypot(p[1]) > 0.75;
        let mut u = random(&mut rng, d.n_reduced());
        let mut v = random(&mut rng, d.n_reduced());
        for (r, p) in d.coords().iter().enumerate() {
            if near_edge(p) {
                u[r] = 0.0;
                v[r] = 0.0;
            }
        }
        let flux: f64 = d.global.boundaries.values().map(|b| b.flux(&u, &v)).sum();
        assert_eq!(flux, 0.0);
    }

    #[test]
    fn self_adjoint_modulo_boundary_terms() {
        let d = disc(generate_circle_mesh(1, "outer"), 5);
        let g = &d.global;
        let mut m = sparse::scale_rows(&g.dl_reduced, &g.h_reduced);
        for b in g.boundaries.values() {
            let corr = &b.e.transpose_view().to_csr() * &sparse::scale_rows(&b.d, &b.h);
            m = &m - &corr;
        }
        let mt = m.transpose_view().to_csr();
        let asym = &m - &mt;
        assert!(sparse::max_abs(&asym) <= 1e-10 * sparse::max_abs(&m));
        let ones = vec![1.0; d.n_reduced()];
        assert!(sparse::matvec(&m, &ones)
            .iter()
            .all(|v| v.abs() < 1e-10 * sparse::max_abs(&m)));
    }

    #[test]
    fn continuous_fields_survive_restriction() {
        let d = disc(generate_circle_mesh(1, "outer"), 5);
        let full: Vec<f64> = d
            .blocks
            .iter()
            .flat_map(|b| b.coords.iter().map(|p| p[0] * p[1]).collect::<Vec<_>>())
            .collect();
        let back = d.embedding.embed(&d.embedding.restrict(&full));
        let worst = full
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-10);
    }
}
