use std::path::PathBuf;

/// Errors produced anywhere in the simulator or optimizer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration: config files, shape/architecture mismatches.
    #[error("configuration error: {0}")]
    Config(String),

    /// A config file entry that failed to parse or validate.
    #[error("{path}:{line}: {message}")]
    ConfigLine {
        path: String,
        line: usize,
        message: String,
    },

    /// Caller supplied an argument outside its documented domain.
    #[error("invalid input: {0}")]
    Input(String),

    /// Malformed binary or text data.
    #[error("format error in {path} at byte offset {offset}: {message}")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    /// Broken internal invariant (e.g. aggregating incongruent models).
    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Failure inside a generation of an experiment.
    #[error("generation {generation}: {source}")]
    Generation {
        generation: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Error category used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::ConfigLine { .. } => ErrorKind::Config,
            Error::Input(_) | Error::Format { .. } | Error::Io { .. } | Error::Csv(_) => {
                ErrorKind::Data
            }
            Error::Generation { source, .. } => match source.kind() {
                ErrorKind::Config => ErrorKind::Config,
                _ => ErrorKind::Runtime,
            },
            Error::Internal(_) | Error::Serde(_) => ErrorKind::Runtime,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Runtime,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
