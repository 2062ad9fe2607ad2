//! Free-space solution of `u_tt = c^2 Delta u + delta(x - x_s) f(t)` in 2D
//! for the Gaussian pulse `f`, with zero initial data.
//!
//! Convolving `f` with the 2D Green's function and substituting
//! `c s = r cosh(w)` gives
//!
//! ```text
//! u = 1 / (c^2 sigma (2 pi)^(3/2)) int_0^inf exp(-(t - t_s - r cosh(w) / c)^2 / (2 sigma^2)) dw
//! ```
//!
//! The integrand is a bump around `cosh(w*) = c (t - t_s) / r` and decays
//! super-exponentially beyond it, so the integral is truncated at
//! `w_max = arcosh(max(1, c (t - t_s + 12 sigma) / r)) + 1`.

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-12;
/// Points closer than this to the source are excluded from error norms.
pub const SOURCE_EXCLUSION_RADIUS: f64 = 1e-12;
const MAX_BISECTIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSourceSolution {
    pub x_s: f64,
    pub y_s: f64,
    pub sigma: f64,
    pub t_source: f64,
    pub c: f64,
    /// Absolute tolerance on `u`.
    pub tolerance: f64,
}

impl PointSourceSolution {
    pub fn new(x_s: f64, y_s: f64, sigma: f64, t_source: f64) -> Result<Self> {
        let s = Self {
            x_s,
            y_s,
            sigma,
            t_source,
            c: 1.0,
            tolerance: DEFAULT_TOLERANCE,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.sigma) || !pos(self.tolerance) || !pos(self.c) {
            return Err(Error::InvalidArgument(format!(
                "sigma, c and tolerance must be positive (got {}, {}, {})",
                self.sigma, self.c, self.tolerance
            )));
        }
        Ok(())
    }

    fn prefactor(&self) -> f64 {
        1.0 / (self.c * self.c * self.sigma * (2.0 * std::f64::consts::PI).powf(1.5))
    }

    /// Truncation point of the integral at distance `r` and time `t`.
    pub fn omega_max(&self, r: f64, t: f64) -> f64 {
        let reach = self.c * (t - self.t_source + 12.0 * self.sigma) / r;
        reach.max(1.0).acosh() + 1.0
    }

    /// Integral over `[0, omega_max]` with the default truncation replaced.
    pub fn integrate_to(&self, r: f64, t: f64, omega_max: f64) -> f64 {
        let tau = t - self.t_source;
        let (rc, s2) = (r / self.c, 2.0 * self.sigma * self.sigma);
        let g = |w: f64| {
            let z = tau - rc * w.cosh();
            (-z * z / s2).exp()
        };
        let tol = self.tolerance / self.prefactor();
        let mut total = 0.0;
        let peak = if tau > rc { (tau / rc).acosh() } else { 0.0 };
        let mut pieces = vec![(0.0, omega_max)];
        if peak > 0.0 && peak < omega_max {
            pieces = vec![(0.0, peak), (peak, omega_max)];
        }
        for (a, b) in pieces {
            total += adaptive_gauss_kronrod(&g, a, b, tol * (b - a) / omega_max);
        }
        self.prefactor() * total
    }

    pub fn u(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        let r = (x - self.x_s).hypot(y - self.y_s);
        if !(r > 0.0) {
            return Err(Error::Domain(format!(
                "solution is singular at the source ({}, {})",
                self.x_s, self.y_s
            )));
        }
        Ok(self.integrate_to(r, t, self.omega_max(r, t)))
    }
}

/// `u(x, y, t)`; see the module documentation.
pub fn exact_u(x: f64, y: f64, t: f64, params: &PointSourceSolution) -> Result<f64> {
    params.u(x, y, t)
}

/// Samples of the exact solution, with source-coincident points set to zero
/// and listed in `excluded`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactField {
    pub values: Vec<f64>,
    pub excluded: Vec<usize>,
}

pub fn exact_field(
    points: &[[f64; 2]],
    t: f64,
    params: &PointSourceSolution,
) -> Result<ExactField> {
    params.validate()?;
    let near =
        |p: &[f64; 2]| (p[0] - params.x_s).hypot(p[1] - params.y_s) <= SOURCE_EXCLUSION_RADIUS;
    let values = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            if near(p) {
                Ok(0.0)
            } else {
                params
                    .u(p[0], p[1], t)
                    .map_err(|e| Error::Domain(format!("point {i}: {e}")))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let excluded = points
        .iter()
        .enumerate()
        .filter(|(_, p)| near(p))
        .map(|(i, _)| i)
        .collect();
    Ok(ExactField { values, excluded })
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
/// Gauss weights at the odd-indexed Kronrod nodes.
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate and its difference to the embedded 7-point
/// Gauss rule.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let center = f(mid);
    let mut kronrod = KRONROD_WEIGHTS[7] * center;
    let mut gauss = GAUSS_WEIGHTS[3] * center;
    for k in 0..7 {
        let dx = half * GK_NODES[k];
        let s = f(mid - dx) + f(mid + dx);
        kronrod += KRONROD_WEIGHTS[k] * s;
        if k % 2 == 1 {
            gauss += GAUSS_WEIGHTS[k / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive bisection until the summed error estimate is below
/// `tol`. Deterministic: intervals are refined largest-error first and ties
/// broken by position.
pub fn adaptive_gauss_kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let (v, e) = gk15(f, a, b);
    let mut parts = vec![(a, b, v, e)];
    for _ in 0..MAX_BISECTIONS * 16 {
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= tol {
            break;
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3).then(y.0.cmp(&x.0)))
            .map(|(i, _)| i)
            .expect("non-empty");
        let (lo, hi, _, _) = parts[worst];
        let m = 0.5 * (lo + hi);
        if !(m > lo && m < hi) {
            break;
        }
        let (v1, e1) = gk15(f, lo, m);
        let (v2, e2) = gk15(f, m, hi);
        parts[worst] = (lo, m, v1, e1);
        parts.push((m, hi, v2, e2));
    }
    parts.iter().map(|p| p.2).sum()
}
