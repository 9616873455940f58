use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the selection engine.
#[derive(Debug, Error)]
pub enum Error {
    /// An input value violates a documented precondition.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    /// The head / surface configuration cannot produce a camera.
    #[error("geometry: {0}")]
    Geometry(String),

    /// A transform hit a singular configuration (e.g. a point at the eye).
    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("bad file format: {0}")]
    Format(String),

    /// A numeric stage produced a non-finite or all-zero result.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The combined volume of interest contains no grid node.
    #[error("no region of interest")]
    EmptyRegion,

    #[error("grid mismatch between selections")]
    GridMismatch,

    #[error("unknown label {0}")]
    UnknownLabel(u32),

    #[error("cluster packing failed after {0} attempts")]
    Packing(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
