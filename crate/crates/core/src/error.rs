use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {0} is not supported, need d >= 3")]
    InvalidDimension(usize),

    #[error("degree {degree} exceeds the basis maximum {max}")]
    DegreeOutOfRange { degree: usize, max: usize },

    #[error("argument {value} outside the domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("{routine} did not converge after {iterations} iterations")]
    NoConvergence { routine: &'static str, iterations: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("distribution is not spherically symmetric")]
    NotSphericallySymmetric,

    #[error("link function has no non-constant component")]
    DegenerateLink,

    #[error("information exponent {s} exceeds the marginal exponent {s_tilde}")]
    ExponentMismatch { s: usize, s_tilde: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value at step {step}: {what}")]
    NonFinite { step: u64, what: &'static str },

    #[error("not supported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
