use std::path::PathBuf;

use crate::mesh::MeshViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("block {block}: non-positive Jacobian {jacobian:e} at grid point {point} ({x}, {y})")]
    InvalidMapping {
        block: usize,
        point: usize,
        x: f64,
        y: f64,
        jacobian: f64,
    },

    #[error("inconsistent mesh: {0}")]
    InconsistentMesh(String),

    #[error("mesh schema error: {0}")]
    Schema(String),

    #[error("mesh validation failed with {} violation(s): {}", .0.len(), join_violations(.0))]
    InvalidMesh(Vec<MeshViolation>),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("solution diverged (non-finite value) at step {step}")]
    Divergence { step: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn join_violations(v: &[MeshViolation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
