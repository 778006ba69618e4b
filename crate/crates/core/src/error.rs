use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A spectral function was evaluated outside its domain.
    #[error("{function}: argument {value} violates {bound}")]
    Domain {
        function: &'static str,
        value: f64,
        bound: String,
    },

    #[error("ill-conditioned noise covariance: {0}")]
    IllConditioned(String),

    /// The norm equation gave a non-positive denominator for the alignment estimate.
    #[error("degenerate spike at theta = {theta}: alignment denominator {denominator} is not positive")]
    DegenerateSpike { theta: f64, denominator: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid rank {rank}: {reason}")]
    InvalidRank { rank: usize, reason: String },

    #[error("only {available} bulk singular values, need at least {required}")]
    InsufficientBulk { available: usize, required: usize },

    /// The effective intensity sqrt(tau)*sigma is at or below the detection threshold.
    #[error("effective intensity {effective} is not above the detection threshold {threshold}")]
    SubThreshold { effective: f64, threshold: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(function: &'static str, value: f64, bound: impl Into<String>) -> Error {
    Error::Domain {
        function,
        value,
        bound: bound.into(),
    }
}
