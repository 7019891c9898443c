use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DsmError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration covers {available} steps but {requested} were requested")]
    ConfigTooShort { available: usize, requested: usize },

    #[error("digit {digit} outside the {mode} on-the-fly range: |v| must be < {limit}")]
    DigitOutOfRange {
        digit: String,
        mode: &'static str,
        limit: String,
    },

    #[error("invariant violated at step {step}: {what}")]
    Invariant { step: usize, what: String },
}

impl DsmError {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        DsmError::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = DsmError> = std::result::Result<T, E>;
