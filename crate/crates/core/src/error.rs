use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KfpError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-positive weight sample at {at}")]
    NonPositiveWeight { at: f64 },

    #[error("io error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),

    /// A checked property failed; `id` names the property.
    #[error("invariant `{id}` violated: {detail}")]
    Invariant { id: &'static str, detail: String },
}

impl From<std::io::Error> for KfpError {
    fn from(e: std::io::Error) -> Self {
        KfpError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, KfpError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> KfpError {
    KfpError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
