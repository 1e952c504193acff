use thiserror::Error;

/// Errors raised by the numerical toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhiError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("metric is not positive definite at x = {x}: {detail}")]
    MetricDegeneracy { x: f64, detail: String },

    #[error("grid too coarse: {0}")]
    Resolution(String),

    #[error("x^-gamma u is unbounded on the samples (max {max:.3e} exceeds {bound:.3e})")]
    WeightMismatch { max: f64, bound: f64 },

    #[error("point lies on the blown-up locus of the chart: {0}")]
    ChartDomain(String),

    #[error("polyhomogeneous expansion is singular: {0}")]
    Singular(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("iterate left the ball: norm {norm:.6e} > eta {eta:.6e} at iteration {iteration}")]
    BallEscape {
        iteration: usize,
        norm: f64,
        eta: f64,
    },

    #[error("fixed-point iteration is not contracting (factors {factors:?})")]
    Divergence { factors: Vec<f64> },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for PhiError {
    fn from(e: std::io::Error) -> Self {
        PhiError::Io(e.to_string())
    }
}

impl From<csv::Error> for PhiError {
    fn from(e: csv::Error) -> Self {
        PhiError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, PhiError>;
