//! TOML problem files.
//!
//! ```toml
//! c = 1.0
//! sigma = 0.04
//! t_source = 0.3
//! source_xy = [0.0, 0.0]
//! t_end = 0.8
//! cfl_fraction = 0.2
//! snapshot_every = 50
//!
//! [boundary]
//! wall = "dirichlet"
//! rocks = "neumann"
//! far = "outflow"
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BoundaryCondition, PointSource, WaveProblem, DEFAULT_CFL_FRACTION};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub c: f64,
    pub sigma: f64,
    pub t_source: f64,
    pub source_xy: [f64; 2],
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl_fraction: f64,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub boundary: BTreeMap<String, BoundaryCondition>,
}

fn default_cfl() -> f64 {
    DEFAULT_CFL_FRACTION
}

fn default_snapshot_every() -> usize {
    100
}

fn default_amplitude() -> f64 {
    1.0
}

impl From<&WaveProblem> for ProblemFile {
    fn from(p: &WaveProblem) -> Self {
        ProblemFile {
            c: p.c,
            sigma: p.source.sigma,
            t_source: p.source.t_source,
            source_xy: [p.source.x, p.source.y],
            t_end: p.t_end,
            cfl_fraction: p.cfl_fraction,
            snapshot_every: p.snapshot_every,
            amplitude: p.source.amplitude,
            boundary: p.boundary.clone(),
        }
    }
}

/// Parse and validate a problem description.
pub fn parse_problem(text: &str) -> Result<WaveProblem> {
    let f: ProblemFile = toml::from_str(text).map_err(|e| Error::Configuration(e.to_string()))?;
    let problem = WaveProblem {
        c: f.c,
        boundary: f.boundary,
        source: PointSource {
            x: f.source_xy[0],
            y: f.source_xy[1],
            sigma: f.sigma,
            t_source: f.t_source,
            amplitude: f.amplitude,
        },
        t_end: f.t_end,
        cfl_fraction: f.cfl_fraction,
        snapshot_every: f.snapshot_every,
    };
    problem.validate()?;
    Ok(problem)
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<WaveProblem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_problem(&text)
}

pub fn problem_to_toml(p: &WaveProblem) -> String {
    toml::to_string(&ProblemFile::from(p)).expect("problem serialization cannot fail")
}
