use std::path::PathBuf;

use damas_core::error::{DamasError, ScenarioError};

/// Process exit code for a configuration the program refuses to run.
pub const EXIT_INVALID_CONFIG: i32 = 2;
/// Process exit code for a solve aborted on a non-finite value.
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid config: {field}: {message}")]
    Config { field: String, message: String },
    #[error("numerical abort: {0}")]
    Numerical(DamasError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Scenario(ScenarioError),
    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => EXIT_INVALID_CONFIG,
            Error::Numerical(_) => EXIT_NUMERICAL,
            Error::Scenario(ScenarioError::Damas(DamasError::NotFinite { .. })) => EXIT_NUMERICAL,
            _ => EXIT_FAILURE,
        }
    }
}

impl From<DamasError> for Error {
    fn from(e: DamasError) -> Self {
        match e {
            DamasError::NotFinite { .. } => Error::Numerical(e),
            other => Error::Other(other.to_string()),
        }
    }
}

impl From<ScenarioError> for Error {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Damas(d @ DamasError::NotFinite { .. }) => Error::Numerical(d),
            other => Error::Scenario(other),
        }
    }
}

macro_rules! other_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Error {
            fn from(e: $t) -> Self {
                Error::Other(e.to_string())
            }
        }
    )*};
}

other_from!(
    damas_core::error::GeometryError,
    damas_core::error::SpectraError,
    damas_core::error::BeamformError
);

pub type Result<T, E = Error> = std::result::Result<T, E>;
