use thiserror::Error;

use crate::discriminant::TraceRatioResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is rank deficient: numeric rank {rank} < {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("label {label} has no samples")]
    MissingLabel { label: usize },

    #[error("sample {sample} has no labels")]
    UnlabeledSample { sample: usize },

    #[error("covariance is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    InvalidCovariance { min_eigenvalue: f64 },

    #[error("total scatter is singular (min eigenvalue {min_eigenvalue:e} below floor {floor:e})")]
    SingularTotalScatter { min_eigenvalue: f64, floor: f64 },

    #[error("invalid label scheme: {0}")]
    InvalidScheme(String),

    #[error("trace ratio iteration did not converge after {} iterations", .last.iterations)]
    NotConverged { last: Box<TraceRatioResult> },

    #[error("spectral gap must be positive, got {0:e}")]
    InvalidGap(f64),

    #[error("projected noise level C_w is zero")]
    DegenerateNoise,

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
