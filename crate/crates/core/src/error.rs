use thiserror::Error;

/// Errors raised while constructing games, policies, configurations or while
/// running one of the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("policy `{0}` is not interior (log of zero)")]
    NonInterior(&'static str),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },
    #[error("beta = 0 has no regularized best response; use the argmax branch")]
    ZeroBeta,
    #[error("numerical failure: {0}")]
    NonFinite(String),
    #[error("beta grid reaches {beta}, which is not below c_beta = {c_beta}")]
    BetaAboveThreshold { beta: f64, c_beta: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(key: &str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// True for failures caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_))
    }
}
