use std::path::{Path, PathBuf};

use thiserror::Error;

/// Command failures, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] gpstack::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for bad input data, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Io { .. } => 1,
            CliError::Core(e) if e.is_config() => 2,
            CliError::Core(_) => 3,
        }
    }

    /// Adds a task id to the message without changing the exit code.
    pub fn in_task(self, task: u32) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("task {task}: {m}")),
            CliError::Data(m) => CliError::Data(format!("task {task}: {m}")),
            CliError::Core(e @ gpstack::Error::Task { .. }) => CliError::Core(e),
            CliError::Core(e) => CliError::Core(e.in_task(task)),
            io @ CliError::Io { .. } => io,
        }
    }
}
