use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] qposer_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("server: {0}")]
    Server(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 success, 1 usage, 2 data or format, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        use qposer_core::Error as E;
        match self {
            Self::Usage(_) => 1,
            Self::Core(E::NonFinite(_) | E::TrainingDivergence { .. } | E::DegenerateInterpolation { .. }) => 3,
            Self::Core(E::UnknownPart { .. } | E::InvalidConfig(_)) => 1,
            Self::Core(_) | Self::Io { .. } | Self::Config { .. } | Self::Server(_) => 2,
        }
    }
}
