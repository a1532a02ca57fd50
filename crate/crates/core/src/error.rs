use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange { what: &'static str, index: usize, len: usize },

    #[error("invalid slot curve: {0}")]
    InvalidCurve(String),

    #[error("invalid bids: {0}")]
    InvalidBids(String),

    #[error("invalid value profile: {0}")]
    InvalidValues(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("cdf vanishes at v = {v} inside the support")]
    SupportViolation { v: f64 },

    #[error("quadrature did not converge: error estimate {estimate:e} above tolerance {tolerance:e}")]
    QuadratureDiverged { estimate: f64, tolerance: f64 },

    #[error("need at least k + 1 = {} agents, got n = {n}", k + 1)]
    InsufficientAgents { n: usize, k: usize },

    #[error("outcome is not efficient")]
    NotEfficient,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
