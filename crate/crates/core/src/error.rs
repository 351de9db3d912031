use std::path::PathBuf;

use thiserror::Error;

use crate::registration::TraceRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error ({context}): {message}")]
    Parse { context: String, message: String },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("unsupported VTK cell type {0} (only linear tetrahedra, type 10, are accepted)")]
    UnsupportedCellType(u32),

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("surface selection is empty: {0}")]
    EmptySelection(String),

    #[error("surface mesh has no triangles")]
    EmptySurface,

    #[error("degenerate element {index}: volume {volume:e} below threshold {threshold:e}")]
    DegenerateElement { index: usize, volume: f64, threshold: f64 },

    #[error("degenerate triangle (area {area:e})")]
    DegenerateTriangle { area: f64 },

    #[error("Cholesky factorization failed at column {column}: pivot {pivot:e} (matrix is not numerically positive definite)")]
    Factorization { column: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("optimal step undefined: ||C K^-1 g||^2 = {curvature:e}")]
    ZeroCurvature { curvature: f64 },

    #[error("non-finite optimizer state at iteration {iteration}")]
    NonFiniteState { iteration: usize, trace: Vec<TraceRecord> },

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("target set is empty")]
    EmptyTargets,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors raised by numerical stages (factorization, optimizer),
    /// as opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateElement { .. }
                | Error::Factorization { .. }
                | Error::ZeroCurvature { .. }
                | Error::NonFiniteState { .. }
                | Error::DegenerateConfiguration(_)
        )
    }
}
