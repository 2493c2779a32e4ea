use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("design matrix is singular (X'WX not invertible)")]
    SingularDesign,

    #[error("IRLS did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("separation detected: {count} of {n} fitted probabilities within 1e-10 of 0 or 1")]
    SeparationDetected { count: usize, n: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input")]
    EmptyInput,

    #[error("empty region")]
    EmptyRegion,

    #[error("region [{start}, {end}) out of bounds for length {len}")]
    RegionOutOfBounds { start: usize, end: usize, len: usize },

    #[error("inconsistent block results: {0}")]
    InconsistentBlocks(String),

    #[error("cannot place {windows} disjoint windows of {window_bp} bp")]
    WindowsDontFit { windows: usize, window_bp: u64 },

    #[error("no true signal regions to evaluate against")]
    NoTruth,

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },

    #[error("corrupt payload: {0}")]
    CorruptPayload(String),

    #[error("{path}: {source}")]
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

    pub(crate) fn parse(path: &str, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            msg: msg.into(),
        }
    }
}
