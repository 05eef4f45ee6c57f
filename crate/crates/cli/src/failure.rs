use std::fmt;

use kfp_core::KfpError;

/// A run that did not succeed. Config problems exit 2, failed checks exit 1.
#[derive(Debug)]
pub enum Failure {
    Config { id: String, detail: String },
    Invariant { id: String, detail: String },
}

impl Failure {
    pub fn config(id: impl Into<String>, detail: impl Into<String>) -> Self {
        Self::Config {
            id: id.into(),
            detail: detail.into(),
        }
    }

    pub fn invariant(id: impl Into<String>, detail: impl Into<String>) -> Self {
        Self::Invariant {
            id: id.into(),
            detail: detail.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => 2,
            Self::Invariant { .. } => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config { id, detail } => write!(f, "config error [{id}]: {detail}"),
            Self::Invariant { id, detail } => write!(f, "check failed [{id}]: {detail}"),
        }
    }
}

impl From<KfpError> for Failure {
    fn from(e: KfpError) -> Self {
        let detail = e.to_string();
        match e {
            KfpError::Invariant { id, .. } => Self::invariant(id, detail),
            KfpError::InvalidParameter { name, .. } => Self::config(format!("param.{name}"), detail),
            KfpError::DimensionMismatch { .. } => Self::config("dimension", detail),
            KfpError::Grid(_) => Self::config("grid", detail),
            KfpError::Unsupported(_) => Self::config("unsupported", detail),
            KfpError::NonPositiveWeight { .. } => Self::config("weight.positive", detail),
            KfpError::Io(_) => Self::config("io", detail),
            KfpError::Format(_) => Self::config("format", detail),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::config("io", e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::config("csv", e.to_string())
    }
}
