use std::path::PathBuf;

use thiserror::Error;

/// Exit codes of the `convac-lab` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const BUDGET: i32 = 3;
    pub const VIOLATION: i32 = 4;
    pub const COMPUTE: i32 = 5;
}

#[derive(Debug, Error)]
pub enum LabError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Invalid configuration; the message starts with the offending field
    /// path.
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Budget(convac_core::Error),
    #[error("{0}")]
    Compute(convac_core::Error),
    #[error("malformed document: {0}")]
    Format(String),
    #[error("bound violations detected: {0}")]
    Violation(String),
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(field: &str, msg: impl std::fmt::Display) -> Self {
        LabError::Config(format!("{field}: {msg}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Io { .. } => exit::IO,
            LabError::Config(_) | LabError::Format(_) => exit::CONFIG,
            LabError::Budget(_) => exit::BUDGET,
            LabError::Compute(_) => exit::COMPUTE,
            LabError::Violation(_) => exit::VIOLATION,
        }
    }
}

impl From<convac_core::Error> for LabError {
    fn from(e: convac_core::Error) -> Self {
        match e {
            convac_core::Error::BudgetExceeded { .. } => LabError::Budget(e),
            other => LabError::Compute(other),
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;
