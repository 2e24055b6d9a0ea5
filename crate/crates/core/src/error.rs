use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("covariance is not positive definite (det = {det:e}, trace = {trace:e})")]
    NotPositiveDefinite { det: f64, trace: f64 },

    #[error("covariance violates the uncertainty bound: det = {0:e} < 1/16")]
    Uncertainty(f64),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: {samples} samples vs {expected} expected values")]
    LengthMismatch { samples: usize, expected: usize },

    #[error("too few samples: got {got}, policy requires at least {min}")]
    TooFewSamples { got: usize, min: usize },

    #[error("invalid range `{0}`")]
    InvalidRange(String),

    #[error("malformed message: {0}")]
    MalformedMessage(String),

    #[error("attack targets leg {leg} which does not exist in {protocol}")]
    UnknownLeg { leg: String, protocol: &'static str },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
