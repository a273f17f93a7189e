use std::path::PathBuf;

use cone_core::ConeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("{context}: {source}")]
    Cone {
        context: String,
        #[source]
        source: ConeError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{failed} of {compared} fields outside tolerance")]
    Mismatch { failed: usize, compared: usize },
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 0 success, 1 numerical failure, 2 usage or configuration error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Cone { source, .. } if is_numerical(source) => 1,
            CliError::Mismatch { .. } => 1,
            _ => 2,
        }
    }
}

/// Failures of a well-posed computation, as opposed to bad input.
pub fn is_numerical(e: &ConeError) -> bool {
    matches!(
        e,
        ConeError::Singular(_)
            | ConeError::EigenNoConvergence(_)
            | ConeError::NewtonDivergence { .. }
            | ConeError::PositivityLoss { .. }
            | ConeError::Instability { .. }
            | ConeError::SingularResolvent { .. }
            | ConeError::SpectrumInSector(_)
            | ConeError::AmplifiedRoundoff { .. }
            | ConeError::WindowSearchFailed { .. }
            | ConeError::BelowNoiseFloor(_)
            | ConeError::VacuousBound(_)
    )
}

/// Attaches a context label to library errors.
pub trait Context<T> {
    fn context(self, what: &str) -> Result<T>;
}

impl<T> Context<T> for std::result::Result<T, ConeError> {
    fn context(self, what: &str) -> Result<T> {
        self.map_err(|source| CliError::Cone { context: what.to_string(), source })
    }
}

pub fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
