//! Errors of the command line and the file layer, with their exit codes.

use std::path::PathBuf;

use flowloc_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    /// 2 for configuration problems, 3 for bad or missing data, 4 for
    /// numeric failures during training or inference.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Numeric(_) => 4,
            CliError::Core(e) => match e {
                CoreError::SimConfig(_) | CoreError::Profile { .. } | CoreError::Hyperparam { .. } => 2,
                CoreError::NonFinite { .. } | CoreError::Diverged { .. } => 4,
                _ => 3,
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Data("x".into()).exit_code(), 3);
        assert_eq!(CliError::Core(CoreError::Diverged { epoch: 1, step: 0, loss: f64::NAN }).exit_code(), 4);
        assert_eq!(CliError::Core(CoreError::SimConfig("n".into())).exit_code(), 2);
        assert_eq!(CliError::Core(CoreError::UnknownRegion(9)).exit_code(), 3);
    }
}
