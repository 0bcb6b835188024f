use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid process parameters q={q}, d={d}: results hold for 0 < q < d <= 2q only")]
    InvalidParams { q: f64, d: f64 },

    #[error("time {t} outside [{lo}, {hi}]")]
    Domain { t: f64, lo: f64, hi: f64 },

    #[error("time points must be strictly increasing: {0}")]
    Ordering(String),

    #[error("degenerate covariance: time {0} appears twice")]
    DegenerateTimes(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("boundary pieces do not tile [{q}, {d}]: {reason}")]
    Tiling { q: f64, d: f64, reason: String },

    #[error("partition does not contain boundary knot {0}")]
    KnotMismatch(f64),

    #[error("integral dimension {dimension} too large for tensor quadrature (max {max}); use the Monte-Carlo or nested estimator")]
    DimensionTooLarge { dimension: usize, max: usize },

    #[error("quadrature did not converge: value {value}, error estimate {error_bound} after {evaluations} evaluations")]
    NonConvergence {
        value: f64,
        error_bound: f64,
        evaluations: usize,
    },

    #[error("matrix not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("boundary file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
