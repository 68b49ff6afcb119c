//! Standard-library companion to `graspkit-core`: file formats, dataset
//! loading, the matching benchmark, evaluation reports, rendering and the
//! `graspkit` command-line tool.

pub mod bench;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod evaluate;
pub mod formats;
pub mod render;
pub mod tensor_file;

/// Command failure, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or configuration; exit code 2.
    #[error("{0}")]
    Usage(String),
    /// The command ran but could not produce its result; exit code 1.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

pub(crate) fn failed(context: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
    CliError::Failed(format!("{context}: {e}"))
}
