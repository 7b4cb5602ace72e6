use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),

    #[error("quadratic majorizer is undefined at center 0 when epsilon = 0")]
    ZeroCenter,

    #[error("non-finite log-likelihood at linear predictor {eta}")]
    NonFinite { eta: f64 },

    #[error("singular system, smallest pivot {pivot:e}")]
    Singular { pivot: f64 },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("point is not stationary: gradient max-norm {grad_max:e} exceeds {tau:e}")]
    NotStationary { grad_max: f64, tau: f64 },

    #[error(
        "exhaustive subset search over d = {d} covariates needs 2^{d} fits; \
         cost grows exponentially and the limit is d = {limit}"
    )]
    TooManyCovariates { d: usize, limit: usize },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by the caller's input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidPenalty(_)
                | Error::InvalidData(_)
                | Error::Parse { .. }
                | Error::Config(_)
                | Error::Io { .. }
                | Error::TooManyCovariates { .. }
        )
    }
}
