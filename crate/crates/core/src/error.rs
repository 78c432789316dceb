use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("edge {index} ({u}, {v}) references a node outside 0..{num_nodes}")]
    NodeOutOfRange {
        index: usize,
        u: usize,
        v: usize,
        num_nodes: usize,
    },

    #[error("edge {index} ({u}, {v}) has negative or non-finite weight {weight}")]
    InvalidWeight {
        index: usize,
        u: usize,
        v: usize,
        weight: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} did not converge within {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("bundle schema violation in field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("class `{class}` has {available} nodes, {required} required for the training split")]
    InsufficientClass {
        class: String,
        available: usize,
        required: usize,
    },

    #[error("empty mask")]
    EmptyMask,

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable short identifier, used for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NodeOutOfRange { .. } => "node_out_of_range",
            Error::InvalidWeight { .. } => "invalid_weight",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NotConverged { .. } => "not_converged",
            Error::Parse { .. } => "parse",
            Error::Schema { .. } => "schema",
            Error::InsufficientClass { .. } => "insufficient_class",
            Error::EmptyMask => "empty_mask",
            Error::Diverged { .. } => "diverged",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
