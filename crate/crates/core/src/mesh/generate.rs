//! Built-in mesh generators.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use super::{Block, CurvedEdge, Interface, MultiblockMesh, Orientation, Side, SideRef};

/// Half width of the central square of the circle mesh.
pub const CIRCLE_INNER_HALF_WIDTH: f64 = 0.4;

const MATCH_TOL: f64 = 1e-12;

fn rotate(p: [f64; 2], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

fn close(a: [f64; 2], b: [f64; 2]) -> bool {
    (a[0] - b[0]).hypot(a[1] - b[1]) <= MATCH_TOL
}

/// Unit disc: a central square surrounded by four blocks with one circular
/// outer edge each, every block split into `4^refinement` sub-blocks.
pub fn generate_circle_mesh(refinement: u32, tag: &str) -> MultiblockMesh {
    let a = CIRCLE_INNER_HALF_WIDTH;
    let mut base = vec![Block::quad([-a, -a], [a, -a], [a, a], [-a, a])];
    for k in 0..4 {
        let rot = k as f64 * FRAC_PI_2;
        let r = |p: [f64; 2]| rotate(p, rot);
        let (lo, hi) = (-FRAC_PI_4 + rot, FRAC_PI_4 + rot);
        let outer_lo = [lo.cos(), lo.sin()];
        let outer_hi = [hi.cos(), hi.sin()];
        // xi points outward, eta counter-clockwise.
        base.push(Block::new(
            CurvedEdge::line(r([a, -a]), outer_lo),
            CurvedEdge::arc([0.0, 0.0], 1.0, lo, hi),
            CurvedEdge::line(r([a, a]), outer_hi),
            CurvedEdge::line(r([a, -a]), r([a, a])),
        ));
    }
    refine(&base, refinement, tag)
}

/// Axis-aligned rectangle split into `nx x ny` straight-sided blocks,
/// numbered `i * ny + j`.
pub fn generate_rectangle_mesh(
    nx: usize,
    ny: usize,
    x_range: [f64; 2],
    y_range: [f64; 2],
    tag: &str,
) -> MultiblockMesh {
    let xs: Vec<f64> = (0..=nx)
        .map(|i| x_range[0] + (x_range[1] - x_range[0]) * i as f64 / nx as f64)
        .collect();
    let ys: Vec<f64> = (0..=ny)
        .map(|j| y_range[0] + (y_range[1] - y_range[0]) * j as f64 / ny as f64)
        .collect();
    let mut blocks = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            blocks.push(Block::quad(
                [xs[i], ys[j]],
                [xs[i + 1], ys[j]],
                [xs[i + 1], ys[j + 1]],
                [xs[i], ys[j + 1]],
            ));
        }
    }
    let mut interfaces = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let b = i * ny + j;
            if i + 1 < nx {
                interfaces.push(Interface {
                    a: (b, Side::East),
                    b: (b + ny, Side::West),
                    orientation: Orientation::Aligned,
                });
            }
            if j + 1 < ny {
                interfaces.push(Interface {
                    a: (b, Side::North),
                    b: (b + 1, Side::South),
                    orientation: Orientation::Aligned,
                });
            }
        }
    }
    let boundaries = untouched_sides(blocks.len(), &interfaces, tag);
    MultiblockMesh {
        blocks,
        interfaces,
        boundaries,
    }
}

fn untouched_sides(nb: usize, interfaces: &[Interface], tag: &str) -> BTreeMap<SideRef, String> {
    let mut out = BTreeMap::new();
    for b in 0..nb {
        for side in Side::ALL {
            out.insert((b, side), tag.to_string());
        }
    }
    for itf in interfaces {
        out.remove(&itf.a);
        out.remove(&itf.b);
    }
    out
}

/// Interfaces between base blocks found by matching edge endpoints and
/// midpoints. Only used on generator-built geometry.
fn match_base_interfaces(base: &[Block]) -> Vec<Interface> {
    let mut out = Vec::new();
    let sides: Vec<SideRef> = (0..base.len())
        .flat_map(|b| Side::ALL.map(|s| (b, s)))
        .collect();
    for (i, &ra) in sides.iter().enumerate() {
        for &rb in &sides[i + 1..] {
            if ra.0 == rb.0 {
                continue;
            }
            let ea = base[ra.0].edge(ra.1);
            let eb = base[rb.0].edge(rb.1);
            if !close(ea.point(0.5), eb.point(0.5)) {
                continue;
            }
            let orientation = if close(ea.start(), eb.start()) && close(ea.end(), eb.end()) {
                Orientation::Aligned
            } else if close(ea.start(), eb.end()) && close(ea.end(), eb.start()) {
                Orientation::Reversed
            } else {
                continue;
            };
            out.push(Interface {
                a: ra,
                b: rb,
                orientation,
            });
        }
    }
    out
}

/// Polynomial or line for the curve `t -> x(a + t (b - a), eta0)` of the
/// block's transfinite map, or the edge itself when `eta0` is 0 or 1.
fn isoline_eta(block: &Block, eta0: f64, a: f64, b: f64) -> CurvedEdge {
    let [s, e, n, w] = &block.edges;
    if eta0 == 0.0 {
        return s.sub_edge(a, b);
    }
    if eta0 == 1.0 {
        return n.sub_edge(a, b);
    }
    let (c00, c10, c01, c11) = (s.start(), s.end(), n.start(), n.end());
    let lo = combine_linear(w.point(eta0), c00, c01, eta0);
    let hi = combine_linear(e.point(eta0), c10, c11, eta0);
    blend(s, n, eta0, a, b, lo, hi)
}

fn isoline_xi(block: &Block, xi0: f64, a: f64, b: f64) -> CurvedEdge {
    let [s, e, n, w] = &block.edges;
    if xi0 == 0.0 {
        return w.sub_edge(a, b);
    }
    if xi0 == 1.0 {
        return e.sub_edge(a, b);
    }
    let (c00, c10, c01, c11) = (s.start(), s.end(), n.start(), n.end());
    let lo = combine_linear(s.point(xi0), c00, c10, xi0);
    let hi = combine_linear(n.point(xi0), c01, c11, xi0);
    blend(w, e, xi0, a, b, lo, hi)
}

/// `p - (1 - t) c0 - t c1`
fn combine_linear(p: [f64; 2], c0: [f64; 2], c1: [f64; 2], t: f64) -> [f64; 2] {
    [
        p[0] - (1.0 - t) * c0[0] - t * c1[0],
        p[1] - (1.0 - t) * c0[1] - t * c1[1],
    ]
}

/// `(1 - w) c0(s) + w c1(s) + (1 - s) lo + s hi` for `s` in `[a, b]`.
fn blend(
    c0: &CurvedEdge,
    c1: &CurvedEdge,
    w: f64,
    a: f64,
    b: f64,
    lo: [f64; 2],
    hi: [f64; 2],
) -> CurvedEdge {
    let (x0, y0) = c0.polynomial_coefficients(a, b);
    let (x1, y1) = c1.polynomial_coefficients(a, b);
    let mix = |p: &[f64], q: &[f64], d: usize| -> Vec<f64> {
        let len = p.len().max(q.len()).max(2);
        let mut out = vec![0.0; len];
        for (k, v) in p.iter().enumerate() {
            out[k] += (1.0 - w) * v;
        }
        for (k, v) in q.iter().enumerate() {
            out[k] += w * v;
        }
        // (1 - s) lo + s hi with s = a + t (b - a)
        out[0] += lo[d] + a * (hi[d] - lo[d]);
        out[1] += (b - a) * (hi[d] - lo[d]);
        out
    };
    let x = mix(&x0, &x1, 0);
    let y = mix(&y0, &y1, 1);
    if x[2..].iter().chain(&y[2..]).all(|&v| v == 0.0) {
        CurvedEdge::line([x[0], y[0]], [x[0] + x[1], y[0] + y[1]])
    } else {
        CurvedEdge::Polynomial { x, y }
    }
}

/// Split every base block into `2^r x 2^r` sub-blocks in its parameter
/// square. Sub-blocks of base block `b` are numbered `offset + I * k + J`.
fn refine(base: &[Block], refinement: u32, tag: &str) -> MultiblockMesh {
    let k = 1usize << refinement;
    let kf = k as f64;
    let frac = |i: usize| if i == k { 1.0 } else { i as f64 / kf };
    let sub = |b: usize, i: usize, j: usize| b * k * k + i * k + j;

    let mut blocks = Vec::with_capacity(base.len() * k * k);
    let mut interfaces = Vec::new();
    for (b, blk) in base.iter().enumerate() {
        for i in 0..k {
            for j in 0..k {
                let (x0, x1, e0, e1) = (frac(i), frac(i + 1), frac(j), frac(j + 1));
                blocks.push(Block::new(
                    isoline_eta(blk, e0, x0, x1),
                    isoline_xi(blk, x1, e0, e1),
                    isoline_eta(blk, e1, x0, x1),
                    isoline_xi(blk, x0, e0, e1),
                ));
                if i + 1 < k {
                    interfaces.push(Interface {
                        a: (sub(b, i, j), Side::East),
                        b: (sub(b, i + 1, j), Side::West),
                        orientation: Orientation::Aligned,
                    });
                }
                if j + 1 < k {
                    interfaces.push(Interface {
                        a: (sub(b, i, j), Side::North),
                        b: (sub(b, i, j + 1), Side::South),
                        orientation: Orientation::Aligned,
                    });
                }
            }
        }
    }

    let along = |b: usize, side: Side, q: usize| match side {
        Side::South => sub(b, q, 0),
        Side::North => sub(b, q, k - 1),
        Side::West => sub(b, 0, q),
        Side::East => sub(b, k - 1, q),
    };
    for itf in match_base_interfaces(base) {
        for q in 0..k {
            let qb = itf.orientation.map(k, q);
            interfaces.push(Interface {
                a: (along(itf.a.0, itf.a.1, q), itf.a.1),
                b: (along(itf.b.0, itf.b.1, qb), itf.b.1),
                orientation: itf.orientation,
            });
        }
    }

    let boundaries = untouched_sides(blocks.len(), &interfaces, tag);
    MultiblockMesh {
        blocks,
        interfaces,
        boundaries,
    }
}
