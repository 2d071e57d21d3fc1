use std::path::{Path, PathBuf};

use mapmatch_core::Error as CoreError;

/// Everything a command can fail with. [`CliError::exit_code`] maps each
/// case onto the process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    /// `line` is 1-based; 0 when the whole document is at fault.
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    /// Prediction and ground truth do not line up.
    #[error("evaluation mismatch: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::EmptyLattice) => 3,
            CliError::Core(CoreError::LengthMismatch { .. } | CoreError::DegenerateEval) | CliError::Mismatch(_) => 4,
            _ => 2,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn parse(path: &Path, line: usize, msg: impl ToString) -> Self {
        CliError::Parse { path: path.to_path_buf(), line, msg: msg.to_string() }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
