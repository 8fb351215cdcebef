use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch: {what} has {actual} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("metric tensor is not symmetric positive definite: {0}")]
    InvalidMetric(String),

    #[error("empty data set")]
    EmptyDataSet,

    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("degenerate vote: receiver and voter coincide")]
    DegenerateVote,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("data set has no tangent frames; run tensor voting first")]
    MissingFrames,

    #[error("constitutive law evaluation failed: {0}")]
    LawEvaluation(String),

    #[error("degenerate element {element}: {reason}")]
    DegenerateElement { element: usize, reason: String },

    #[error(
        "singular system: {zero_energy_modes} zero-energy mode(s) among {free_dofs} free dofs \
         (insufficient supports?)"
    )]
    Singular {
        zero_energy_modes: usize,
        free_dofs: usize,
    },

    #[error("Newton solver did not converge in {iterations} iterations; residual history {history:?}")]
    NewtonDivergence { iterations: usize, history: Vec<f64> },

    #[error("malformed file {path}: line {line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("inconsistent file {path}: {reason}")]
    Inconsistent { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
