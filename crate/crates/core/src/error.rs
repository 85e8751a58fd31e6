use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid random variable: {0}")]
    InvalidRv(String),

    #[error("random variables do not share a sample space: {0}")]
    MismatchedSampleSpace(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("quantile level {0} is outside (0, 1)")]
    BadLevel(f64),

    #[error("bandwidth {0} is not a positive finite number")]
    BadBandwidth(f64),

    #[error("unsupported germ family `{0}`")]
    UnsupportedFamily(String),

    #[error("{what} is not symmetric positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotSpd { what: &'static str, min_eigenvalue: f64 },

    #[error("fitted target variance {0:e} is not positive")]
    NegativeTargetVariance(f64),

    #[error("time {time} is not on the model time grid (step {step})")]
    TimeGridMismatch { time: f64, step: f64 },

    #[error("state became non-finite")]
    NonFiniteState,

    #[error("a quadrature grid is required to update polynomial chaos variables")]
    MissingGrid,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),
}
