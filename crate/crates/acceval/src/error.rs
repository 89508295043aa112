use std::io;
use std::path::{Path, PathBuf};

use acceval_core::cross_entropy::CeError;
use acceval_core::{DistributionError, FitError, McError, ScenarioError, TiltError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Row {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("fit failed: {0}")]
    Fit(#[from] FitError),
    #[error("cross-entropy failed: {0}")]
    Ce(#[from] CeError),
    #[error("estimation failed: {0}")]
    Mc(#[from] McError),
    #[error("scenario error: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("invalid distribution: {0}")]
    Distribution(#[from] DistributionError),
    #[error("invalid proposal: {0}")]
    Tilt(#[from] TiltError),
}

impl AppError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, message: impl ToString) -> Self {
        Self::Format {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    /// Process exit status: 2 configuration, 3 numeric failure, 4 input/output.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io { .. } | Self::Row { .. } | Self::Format { .. } => 4,
            Self::Fit(e) => match e {
                FitError::Config(_)
                | FitError::OutOfSupport { .. }
                | FitError::ZeroWeight { .. } => 2,
                _ => 3,
            },
            Self::Ce(CeError::Config(_)) | Self::Mc(McError::Config(_)) => 2,
            Self::Scenario(ScenarioError::Controller(_)) => 2,
            Self::Ce(_)
            | Self::Mc(_)
            | Self::Scenario(_)
            | Self::Distribution(_)
            | Self::Tilt(_) => 3,
        }
    }
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;
