//! Curvilinear quadrilateral multiblock meshes.
//!
//! Each block is the transfinite (Coons) image of the unit square bounded by
//! four parametrized edges. Edges are stored in the order south, east, north,
//! west and are parametrized in the direction of increasing `xi` (south,
//! north) or `eta` (east, west), so the block's own orientation is fixed by
//! the edges alone. Interfaces between blocks are declared explicitly and
//! cross-checked geometrically; every other side carries a boundary tag.

mod edge;
mod generate;
mod io;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use edge::CurvedEdge;
pub use generate::{generate_circle_mesh, generate_rectangle_mesh, CIRCLE_INNER_HALF_WIDTH};
pub use io::{load_mesh, parse_mesh, save_mesh, to_json, MeshFile, MESH_FORMAT_VERSION};

use crate::error::{Error, Result};
use crate::sbp1d::SbpOperator1D;

/// Closure tolerance for block corners.
pub const CORNER_TOL: f64 = 1e-12;
/// Tolerance for interface point matching.
pub const INTERFACE_TOL: f64 = 1e-10;
const INTERFACE_SAMPLES: usize = 17;
const INJECTIVITY_SAMPLES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "s")]
    South,
    #[serde(rename = "e")]
    East,
    #[serde(rename = "n")]
    North,
    #[serde(rename = "w")]
    West,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::South, Side::East, Side::North, Side::West];

    pub fn index(self) -> usize {
        match self {
            Side::South => 0,
            Side::East => 1,
            Side::North => 2,
            Side::West => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::South => "s",
            Side::East => "e",
            Side::North => "n",
            Side::West => "w",
        }
    }

    /// Block-local tensor index of the `k`-th node along this side, for an
    /// `n x n` grid ordered `xi`-major (`index = i * n + j`).
    pub fn node_index(self, n: usize, k: usize) -> usize {
        match self {
            Side::South => k * n,
            Side::North => k * n + n - 1,
            Side::West => k,
            Side::East => (n - 1) * n + k,
        }
    }

    pub fn node_indices(self, n: usize) -> Vec<usize> {
        (0..n).map(|k| self.node_index(n, k)).collect()
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the parametrizations of two interface sides relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Node `k` of side a meets node `k` of side b.
    Aligned,
    /// Node `k` of side a meets node `n - 1 - k` of side b.
    Reversed,
}

impl Orientation {
    pub fn map(self, n: usize, k: usize) -> usize {
        match self {
            Orientation::Aligned => k,
            Orientation::Reversed => n - 1 - k,
        }
    }

    fn map_param(self, s: f64) -> f64 {
        match self {
            Orientation::Aligned => s,
            Orientation::Reversed => 1.0 - s,
        }
    }
}

/// A block side, `(block index, side)`.
pub type SideRef = (usize, Side);

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    /// South, east, north, west.
    pub edges: [CurvedEdge; 4],
}

impl Block {
    pub fn new(south: CurvedEdge, east: CurvedEdge, north: CurvedEdge, west: CurvedEdge) -> Self {
        Self {
            edges: [south, east, north, west],
        }
    }

    pub fn edge(&self, side: Side) -> &CurvedEdge {
        &self.edges[side.index()]
    }

    /// Straight-sided block with corners given counter-clockwise starting at
    /// the `(xi, eta) = (0, 0)` corner.
    pub fn quad(c00: [f64; 2], c10: [f64; 2], c11: [f64; 2], c01: [f64; 2]) -> Self {
        Self::new(
            CurvedEdge::line(c00, c10),
            CurvedEdge::line(c10, c11),
            CurvedEdge::line(c01, c11),
            CurvedEdge::line(c00, c01),
        )
    }

    /// Pairs of edge endpoints that must coincide for the block to close.
    fn corner_pairs(&self) -> [([f64; 2], [f64; 2], &'static str); 4] {
        let [s, e, n, w] = &self.edges;
        [
            (s.start(), w.start(), "south-west"),
            (s.end(), e.start(), "south-east"),
            (n.end(), e.end(), "north-east"),
            (n.start(), w.end(), "north-west"),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interface {
    pub a: SideRef,
    pub b: SideRef,
    pub orientation: Orientation,
}

impl Interface {
    /// The side that receives the interface penalty: the smaller of the two
    /// `(block, side)` pairs.
    pub fn owner_and_neighbor(&self) -> (SideRef, SideRef) {
        if self.a <= self.b {
            (self.a, self.b)
        } else {
            (self.b, self.a)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiblockMesh {
    pub blocks: Vec<Block>,
    pub interfaces: Vec<Interface>,
    /// Tag of every side that is not on an interface.
    pub boundaries: BTreeMap<SideRef, String>,
}

impl MultiblockMesh {
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Distinct boundary tags in sorted order.
    pub fn tags(&self) -> Vec<String> {
        let mut t: Vec<String> = self.boundaries.values().cloned().collect();
        t.sort();
        t.dedup();
        t
    }

    /// Re-assign boundary tags. The closure receives the side and the
    /// physical midpoint of its edge.
    pub fn retag(&mut self, mut f: impl FnMut(SideRef, [f64; 2]) -> String) {
        let keys: Vec<SideRef> = self.boundaries.keys().copied().collect();
        for key in keys {
            let mid = self.blocks[key.0].edge(key.1).point(0.5);
            self.boundaries.insert(key, f(key, mid));
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Transfinite interpolation of the block edges at `(xi, eta)`.
///
/// On the boundary of the parameter square the corresponding edge is
/// evaluated directly, so edges are reproduced exactly.
pub fn coons_patch(block: &Block, xi: f64, eta: f64) -> Result<[f64; 2]> {
    if !(0.0..=1.0).contains(&xi) || !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidArgument(format!(
            "reference coordinates ({xi}, {eta}) outside [0, 1]^2"
        )));
    }
    let [s, e, n, w] = &block.edges;
    if eta == 0.0 {
        return Ok(s.point(xi));
    }
    if eta == 1.0 {
        return Ok(n.point(xi));
    }
    if xi == 0.0 {
        return Ok(w.point(eta));
    }
    if xi == 1.0 {
        return Ok(e.point(eta));
    }
    let (ps, pn, pw, pe) = (s.point(xi), n.point(xi), w.point(eta), e.point(eta));
    let (c00, c10, c01, c11) = (s.start(), s.end(), n.start(), n.end());
    let mut out = [0.0; 2];
    for d in 0..2 {
        out[d] = (1.0 - eta) * ps[d] + eta * pn[d] + (1.0 - xi) * pw[d] + xi * pe[d]
            - ((1.0 - xi) * (1.0 - eta) * c00[d]
                + xi * (1.0 - eta) * c10[d]
                + (1.0 - xi) * eta * c01[d]
                + xi * eta * c11[d]);
    }
    Ok(out)
}

/// Physical coordinates of the `n x n` Gauss-Lobatto grid of a block,
/// ordered `xi`-major.
pub fn block_grid(block: &Block, op: &SbpOperator1D) -> Vec<[f64; 2]> {
    let t = op.nodes();
    let mut out = Vec::with_capacity(t.len() * t.len());
    for &xi in t {
        for &eta in t {
            // Nodes lie in [0, 1] so the patch cannot fail.
            out.push(coons_patch(block, xi, eta).expect("Gauss-Lobatto nodes lie in [0, 1]"));
        }
    }
    out
}

/// A violated mesh invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshViolation {
    MalformedEdge {
        block: usize,
        side: Side,
        reason: String,
    },
    OpenCorner {
        block: usize,
        corner: &'static str,
        gap: f64,
    },
    NonInjectiveEdge {
        block: usize,
        side: Side,
    },
    DanglingReference {
        what: String,
        block: usize,
    },
    SideUsedTwice {
        block: usize,
        side: Side,
    },
    UncoveredSide {
        block: usize,
        side: Side,
    },
    SelfInterface {
        block: usize,
        side: Side,
    },
    GeometricMismatch {
        a: SideRef,
        b: SideRef,
        gap: f64,
    },
    EmptyTag {
        block: usize,
        side: Side,
    },
}

impl fmt::Display for MeshViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshViolation::MalformedEdge {
                block,
                side,
                reason,
            } => write!(f, "block {block} side {side}: {reason}"),
            MeshViolation::OpenCorner { block, corner, gap } => {
                write!(f, "block {block}: {corner} corner open by {gap:e}")
            }
            MeshViolation::NonInjectiveEdge { block, side } => {
                write!(f, "block {block} side {side}: edge parametrization is not injective")
            }
            MeshViolation::DanglingReference { what, block } => {
                write!(f, "{what} references missing block {block}")
            }
            MeshViolation::SideUsedTwice { block, side } => {
                write!(f, "block {block} side {side} is assigned more than once")
            }
            MeshViolation::UncoveredSide { block, side } => {
                write!(f, "block {block} side {side} has neither an interface nor a boundary tag")
            }
            MeshViolation::SelfInterface { block, side } => {
                write!(f, "block {block} side {side} is joined to itself")
            }
            MeshViolation::GeometricMismatch { a, b, gap } => write!(
                f,
                "interface between block {} side {} and block {} side {}: geometric mismatch {gap:e}",
                a.0, a.1, b.0, b.1
            ),
            MeshViolation::EmptyTag { block, side } => {
                write!(f, "block {block} side {side} has an empty boundary tag")
            }
        }
    }
}

fn edge_is_injective(edge: &CurvedEdge) -> bool {
    let pts: Vec<[f64; 2]> = (0..=INJECTIVITY_SAMPLES)
        .map(|k| edge.point(k as f64 / INJECTIVITY_SAMPLES as f64))
        .collect();
    let total: f64 = pts.windows(2).map(|w| dist(w[0], w[1])).sum();
    if !(total > 0.0) || !total.is_finite() {
        return false;
    }
    // Consecutive chords may not fold back, and distinct samples may not
    // revisit earlier ones.
    for w in pts.windows(3) {
        let u = [w[1][0] - w[0][0], w[1][1] - w[0][1]];
        let v = [w[2][0] - w[1][0], w[2][1] - w[1][1]];
        if u[0] * v[0] + u[1] * v[1] <= 0.0 {
            return false;
        }
    }
    let floor = 1e-12 * total;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if dist(pts[i], pts[j]) <= floor {
                return false;
            }
        }
    }
    true
}

/// Check every structural and geometric invariant. An empty result means the
/// mesh is valid.
pub fn validate_mesh(mesh: &MultiblockMesh) -> Vec<MeshViolation> {
    let mut out = Vec::new();
    let nb = mesh.blocks.len();

    let mut shapes_ok = vec![true; nb];
    for (b, block) in mesh.blocks.iter().enumerate() {
        for side in Side::ALL {
            if let Some(reason) = block.edge(side).shape_problem() {
                out.push(MeshViolation::MalformedEdge {
                    block: b,
                    side,
                    reason,
                });
                shapes_ok[b] = false;
            }
        }
        if !shapes_ok[b] {
            continue;
        }
        for (p, q, corner) in block.corner_pairs() {
            let gap = dist(p, q);
            if !(gap <= CORNER_TOL) {
                out.push(MeshViolation::OpenCorner {
                    block: b,
                    corner,
                    gap,
                });
            }
        }
        for side in Side::ALL {
            if !edge_is_injective(block.edge(side)) {
                out.push(MeshViolation::NonInjectiveEdge { block: b, side });
            }
        }
    }

    let mut uses: BTreeMap<SideRef, usize> = BTreeMap::new();
    for (i, itf) in mesh.interfaces.iter().enumerate() {
        let mut ok = true;
        for r in [itf.a, itf.b] {
            if r.0 >= nb {
                out.push(MeshViolation::DanglingReference {
                    what: format!("interface {i}"),
                    block: r.0,
                });
                ok = false;
            } else {
                *uses.entry(r).or_default() += 1;
            }
        }
        if itf.a == itf.b {
            out.push(MeshViolation::SelfInterface {
                block: itf.a.0,
                side: itf.a.1,
            });
            ok = false;
        }
        if ok && shapes_ok[itf.a.0] && shapes_ok[itf.b.0] {
            let ea = mesh.blocks[itf.a.0].edge(itf.a.1);
            let eb = mesh.blocks[itf.b.0].edge(itf.b.1);
            let gap = (0..INTERFACE_SAMPLES)
                .map(|k| {
                    let s = k as f64 / (INTERFACE_SAMPLES - 1) as f64;
                    dist(ea.point(s), eb.point(itf.orientation.map_param(s)))
                })
                .fold(0.0, f64::max);
            if !(gap <= INTERFACE_TOL) {
                out.push(MeshViolation::GeometricMismatch {
                    a: itf.a,
                    b: itf.b,
                    gap,
                });
            }
        }
    }
    for (&(b, side), tag) in &mesh.boundaries {
        if b >= nb {
            out.push(MeshViolation::DanglingReference {
                what: format!("boundary tag '{tag}'"),
                block: b,
            });
            continue;
        }
        if tag.is_empty() {
            out.push(MeshViolation::EmptyTag { block: b, side });
        }
        *uses.entry((b, side)).or_default() += 1;
    }
    for b in 0..nb {
        for side in Side::ALL {
            match uses.get(&(b, side)).copied().unwrap_or(0) {
                0 => out.push(MeshViolation::UncoveredSide { block: b, side }),
                1 => {}
                _ => out.push(MeshViolation::SideUsedTwice { block: b, side }),
            }
        }
    }
    out
}
