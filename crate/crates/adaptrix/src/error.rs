//! Workspace-wide error type with a coarse category used by the CLI to pick
//! exit codes.

use std::path::PathBuf;
use thiserror::Error;

/// Coarse failure class: bad arguments, bad input data, or a numerical
/// breakdown at runtime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Argument,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("neighbor order k={k} must be at most {max} for n={n} points")]
    NeighborOrderTooLarge { k: usize, max: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("neighbor table depth {depth} too shallow, need at least {needed}; rebuild with larger K")]
    TableTooShallow { depth: usize, needed: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV format error at line {line}: {message}")]
    CsvFormat { line: usize, message: String },

    #[error("CSV parse error at row {row}, column {column}: {message}")]
    CsvParse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("degenerate count ratio: no points fall inside the inner balls, the estimate diverges")]
    DegenerateRatio,

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    EigenNonConvergence { iterations: usize, residual: f64 },

    #[error("neighborhood graph is disconnected ({components} components)")]
    DisconnectedGraph { components: usize },

    #[error("vertex {index} is isolated (degree 0)")]
    IsolatedVertex { index: usize },

    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Classify for exit-code mapping (argument / data / numerical).
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidArgument(_)
            | Error::NeighborOrderTooLarge { .. }
            | Error::DimensionMismatch { .. }
            | Error::TableTooShallow { .. } => ErrorCategory::Argument,
            Error::Io { .. }
            | Error::CsvFormat { .. }
            | Error::CsvParse { .. }
            | Error::InsufficientData(_) => ErrorCategory::Data,
            Error::DegenerateGeometry(_)
            | Error::DegenerateRatio
            | Error::EigenNonConvergence { .. }
            | Error::DisconnectedGraph { .. }
            | Error::IsolatedVertex { .. } => ErrorCategory::Numerical,
            Error::Row { source, .. } | Error::Stage { source, .. } => source.category(),
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
