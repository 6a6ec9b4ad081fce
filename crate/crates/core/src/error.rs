use std::path::PathBuf;

use crate::solver::DualState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Dimensions that cannot support zero-forcing or the requested partition.
    #[error("infeasible dimensions: {0}")]
    Feasibility(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A formula evaluated outside its domain (e.g. pathloss at zero distance).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate channel for MT {mt}: {reason}")]
    Degenerate { mt: usize, reason: String },

    #[error("invalid dual point: {0}")]
    InvalidDual(String),

    #[error("ellipsoid method did not converge after {iterations} cuts (gap {gap:.3e})")]
    NonConvergence {
        iterations: usize,
        gap: f64,
        best: DualState,
    },

    /// The transfer-recovery LP found no feasible transfers for a power vector
    /// that should have been primal-optimal.
    #[error("inconsistent primal point: {0}")]
    Inconsistent(String),

    #[error("unsupported dimension: {0}")]
    Unsupported(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
