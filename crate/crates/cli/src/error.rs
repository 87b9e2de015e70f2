use std::path::Path;

use stefan_core::config::ConfigError;
use stefan_core::studies::StudyError;
use stefan_core::{ModelError, RunError, StepError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Csv { path: String, message: String },
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Study(StudyError),
    #[error("{0} of the stress problems failed to converge")]
    StressFailures(usize),
}

impl From<StudyError> for CliError {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::Run(run) => CliError::Run(run),
            other => CliError::Study(other),
        }
    }
}

impl CliError {
    pub fn csv(path: &Path, e: csv::Error) -> CliError {
        CliError::Csv {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    /// 1 for validation and I/O problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(RunError {
                source: StepError::Solve(_),
                ..
            })
            | CliError::StressFailures(_) => 2,
            _ => 1,
        }
    }
}
