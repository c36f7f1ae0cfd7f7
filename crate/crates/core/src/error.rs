use thiserror::Error;

/// Errors raised by the knockoff toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is not symmetric (|a[{row},{col}] - a[{col},{row}]| = {gap:e})")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid group partition: {0}")]
    InvalidPartition(String),

    #[error("target level q = {0} is outside [0, 1]")]
    InvalidLevel(f64),

    #[error("invalid hypergeometric counts: {0}")]
    InvalidCounts(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    NumericalDivergence { epoch: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::NonConvergence { .. }
                | Error::DegenerateCovariance(_)
                | Error::NumericalDivergence { .. }
        )
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
