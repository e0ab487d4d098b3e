use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty evaluation set")]
    EmptyEvaluationSet,

    #[error("index {index} out of range for grid of {len} locations")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid variogram (not conditionally negative definite): smallest eigenvalue {min_eig:.3e}, largest {max_eig:.3e}")]
    InvalidVariogram { min_eig: f64, max_eig: f64 },

    #[error("covariance factorization failed after diagonal jitter up to {jitter:.1e}")]
    Factorization { jitter: f64 },

    #[error("acceptance probability too low; raise max_attempts or lower u (path {path} rejected {attempts} proposals)")]
    AcceptanceTooLow { path: usize, attempts: u64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("covariate has zero variance")]
    ZeroVarianceCovariate,

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("insufficient Monte Carlo resolution: ensemble has {n} members, need at least {min}")]
    InsufficientMonteCarlo { n: usize, min: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
