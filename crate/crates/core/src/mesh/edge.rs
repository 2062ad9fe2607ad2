use serde::{Deserialize, Serialize};

/// Degree of the Taylor expansion used when a circular arc has to be
/// re-expressed as a polynomial. The remainder for an angular span of
/// `pi/2` is below `1e-20`.
const ARC_TAYLOR_DEGREE: usize = 24;

/// A parametrized boundary curve `s -> (x, y)` for `s` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CurvedEdge {
    Line {
        from: [f64; 2],
        to: [f64; 2],
    },
    /// `center + radius (cos t, sin t)` with `t = theta0 + s (theta1 - theta0)`.
    CircularArc {
        center: [f64; 2],
        radius: f64,
        theta0: f64,
        theta1: f64,
    },
    /// Monomial coefficients in `s`, lowest degree first.
    Polynomial {
        x: Vec<f64>,
        y: Vec<f64>,
    },
}

fn horner(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * s + v)
}

/// Coefficients of `q(t) = p(a + t (b - a))`.
fn reparametrize(c: &[f64], a: f64, b: f64) -> Vec<f64> {
    let scale = b - a;
    // Expand with Horner's scheme on polynomials in t.
    let mut out = vec![0.0; c.len()];
    for &ck in c.iter().rev() {
        // out <- out * (a + scale t) + ck
        let mut next = vec![0.0; c.len()];
        for (k, &v) in out.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            next[k] += v * a;
            if k + 1 < next.len() {
                next[k + 1] += v * scale;
            }
        }
        next[0] += ck;
        out = next;
    }
    out
}

impl CurvedEdge {
    pub fn line(from: [f64; 2], to: [f64; 2]) -> Self {
        CurvedEdge::Line { from, to }
    }

    pub fn arc(center: [f64; 2], radius: f64, theta0: f64, theta1: f64) -> Self {
        CurvedEdge::CircularArc {
            center,
            radius,
            theta0,
            theta1,
        }
    }

    pub fn point(&self, s: f64) -> [f64; 2] {
        match self {
            CurvedEdge::Line { from, to } => {
                if s == 1.0 {
                    return *to;
                }
                [
                    from[0] + s * (to[0] - from[0]),
                    from[1] + s * (to[1] - from[1]),
                ]
            }
            CurvedEdge::CircularArc {
                center,
                radius,
                theta0,
                theta1,
            } => {
                let t = if s == 1.0 {
                    *theta1
                } else {
                    theta0 + s * (theta1 - theta0)
                };
                [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
            }
            CurvedEdge::Polynomial { x, y } => [horner(x, s), horner(y, s)],
        }
    }

    pub fn start(&self) -> [f64; 2] {
        self.point(0.0)
    }

    pub fn end(&self) -> [f64; 2] {
        self.point(1.0)
    }

    /// The same point set traversed in the opposite direction.
    pub fn reversed(&self) -> Self {
        match self {
            CurvedEdge::Line { from, to } => CurvedEdge::Line {
                from: *to,
                to: *from,
            },
            CurvedEdge::CircularArc {
                center,
                radius,
                theta0,
                theta1,
            } => CurvedEdge::CircularArc {
                center: *center,
                radius: *radius,
                theta0: *theta1,
                theta1: *theta0,
            },
            CurvedEdge::Polynomial { x, y } => CurvedEdge::Polynomial {
                x: reparametrize(x, 1.0, 0.0),
                y: reparametrize(y, 1.0, 0.0),
            },
        }
    }

    /// The piece of the curve between parameters `a` and `b`, reparametrized
    /// to `[0, 1]`. Lines stay lines and arcs stay arcs.
    pub fn sub_edge(&self, a: f64, b: f64) -> Self {
        match self {
            CurvedEdge::Line { .. } => CurvedEdge::Line {
                from: self.point(a),
                to: self.point(b),
            },
            CurvedEdge::CircularArc {
                center,
                radius,
                theta0,
                theta1,
            } => {
                let span = theta1 - theta0;
                let t0 = if a == 1.0 { *theta1 } else { theta0 + a * span };
                let t1 = if b == 1.0 { *theta1 } else { theta0 + b * span };
                CurvedEdge::CircularArc {
                    center: *center,
                    radius: *radius,
                    theta0: t0,
                    theta1: t1,
                }
            }
            CurvedEdge::Polynomial { x, y } => CurvedEdge::Polynomial {
                x: reparametrize(x, a, b),
                y: reparametrize(y, a, b),
            },
        }
    }

    /// Monomial coefficients (in the local parameter of `[a, b]`) of the
    /// x and y components. Exact for lines and polynomials, a truncated
    /// Taylor series for arcs.
    pub fn polynomial_coefficients(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        match self.sub_edge(a, b) {
            CurvedEdge::Line { from, to } => (
                vec![from[0], to[0] - from[0]],
                vec![from[1], to[1] - from[1]],
            ),
            CurvedEdge::CircularArc {
                center,
                radius,
                theta0,
                theta1,
            } => {
                let span = theta1 - theta0;
                let mut xs = Vec::with_capacity(ARC_TAYLOR_DEGREE + 1);
                let mut ys = Vec::with_capacity(ARC_TAYLOR_DEGREE + 1);
                let mut fact = 1.0;
                let mut pow = 1.0;
                for k in 0..=ARC_TAYLOR_DEGREE {
                    if k > 0 {
                        fact *= k as f64;
                        pow *= span;
                    }
                    // k-th derivatives of cos and sin at theta0.
                    let phase = theta0 + k as f64 * std::f64::consts::FRAC_PI_2;
                    xs.push(radius * pow / fact * phase.cos());
                    ys.push(radius * pow / fact * phase.sin());
                }
                xs[0] += center[0];
                ys[0] += center[1];
                (xs, ys)
            }
            CurvedEdge::Polynomial { x, y } => (x, y),
        }
    }

    /// Whether all stored numbers are finite and the description is
    /// well-formed.
    pub(crate) fn shape_problem(&self) -> Option<String> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            CurvedEdge::Line { from, to } => {
                (!finite(from) || !finite(to)).then(|| "non-finite line endpoint".into())
            }
            CurvedEdge::CircularArc {
                center,
                radius,
                theta0,
                theta1,
            } => {
                if !finite(center) || !finite(&[*radius, *theta0, *theta1]) {
                    Some("non-finite arc parameter".into())
                } else if *radius <= 0.0 {
                    Some(format!("arc radius must be positive, got {radius}"))
                } else if (theta1 - theta0).abs() >= 2.0 * std::f64::consts::PI {
                    Some("arc spans a full turn or more".into())
                } else {
                    None
                }
            }
            CurvedEdge::Polynomial { x, y } => {
                if x.is_empty() || y.is_empty() {
                    Some("polynomial edge needs at least one coefficient per component".into())
                } else if !finite(x) || !finite(y) {
                    Some("non-finite polynomial coefficient".into())
                } else {
                    None
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    #[test]
    fn arc_endpoints_and_midpoint() {
        let e = CurvedEdge::arc([0.0, 0.0], 2.0, 0.0, FRAC_PI_2);
        assert!(dist(e.start(), [2.0, 0.0]) < 1e-15);
        assert_eq!(e.end(), [2.0 * FRAC_PI_2.cos(), 2.0 * FRAC_PI_2.sin()]);
        let m = e.point(0.5);
        assert!((m[0].hypot(m[1]) - 2.0).abs() < 1e-15);
        assert!((m[1].atan2(m[0]) - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn reversal_traces_same_points() {
        let edges = [
            CurvedEdge::line([0.0, 1.0], [2.0, -1.0]),
            CurvedEdge::arc([1.0, 1.0], 0.5, -0.3, 1.2),
            CurvedEdge::Polynomial {
                x: vec![0.1, 1.0, -0.5, 0.25],
                y: vec![0.0, 0.3, 0.7],
            },
        ];
        for e in &edges {
            let r = e.reversed();
            for k in 0..=16 {
                let s = k as f64 / 16.0;
                assert!(dist(e.point(s), r.point(1.0 - s)) < 1e-14);
            }
        }
    }

    #[test]
    fn arc_taylor_polynomial_matches_arc() {
        let e = CurvedEdge::arc([0.3, -0.2], 1.0, -FRAC_PI_4, FRAC_PI_4);
        let (x, y) = e.polynomial_coefficients(0.25, 1.0);
        let p = CurvedEdge::Polynomial { x, y };
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            let s = 0.25 + 0.75 * t;
            assert!(dist(e.point(s), p.point(t)) < 1e-15);
        }
    }

    #[test]
    fn sub_edge_of_polynomial() {
        let e = CurvedEdge::Polynomial {
            x: vec![1.0, -2.0, 0.5],
            y: vec![0.0, 1.0, 1.0, -1.0],
        };
        let sub = e.sub_edge(0.2, 0.6);
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            assert!(dist(sub.point(t), e.point(0.2 + 0.4 * t)) < 1e-15);
        }
    }
}
