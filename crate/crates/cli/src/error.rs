use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced to the user; each maps to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] scpo::Error),

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid model file {path}: {source}")]
    ModelFormat {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("model file {path} has schema version {found}, expected {expected}")]
    SchemaVersion { path: PathBuf, found: u32, expected: u32 },

    #[error("model has no calibration scores; run `scpo calibrate` first")]
    Uncalibrated,

    #[error("training diverged after {iterations} iterations (non-finite loss or gradient); try a smaller --eta")]
    Diverged { iterations: usize },
}

impl CliError {
    pub const USAGE: u8 = 1;
    pub const DATA: u8 = 2;
    pub const NUMERICAL: u8 = 3;

    pub fn exit_code(&self) -> u8 {
        use scpo::Error as E;
        match self {
            Self::Usage(_) => Self::USAGE,
            Self::Diverged { .. } => Self::NUMERICAL,
            Self::Core(e) => match e {
                E::InvalidParameter { .. } => Self::USAGE,
                E::NonFinite(_) | E::NonPositiveLoss(..) | E::AllDiverged => Self::NUMERICAL,
                _ => Self::DATA,
            },
            Self::Io { .. } | Self::ModelFormat { .. } | Self::SchemaVersion { .. } | Self::Uncalibrated => Self::DATA,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }
}

pub type CliResult<T> = Result<T, CliError>;
