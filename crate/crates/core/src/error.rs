use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Idx(#[from] IdxError),

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn in_round(self, round: usize) -> Self {
        match self {
            already @ Error::Round { .. } => already,
            other => Error::Round {
                round,
                source: Box::new(other),
            },
        }
    }
}

/// Failures while decoding IDX image/label files.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdxError {
    #[error("bad magic in {file}: expected {expected:#010x}, found {found:#010x}")]
    BadMagic {
        file: &'static str,
        expected: u32,
        found: u32,
    },
    #[error("truncated {file}: missing {field}")]
    Truncated {
        file: &'static str,
        field: &'static str,
    },
    #[error("count mismatch: {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("{file}: dimension {field} is zero or too large")]
    BadDimension {
        file: &'static str,
        field: &'static str,
    },
}

/// Failures while decoding a checkpoint container.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckpointError {
    #[error("bad checkpoint magic: expected \"CRFF\", found {found:?}")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported checkpoint version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },
    #[error("truncated checkpoint: section {section} is incomplete")]
    Truncated { section: &'static str },
    #[error("malformed checkpoint section {section}: {reason}")]
    Malformed {
        section: &'static str,
        reason: String,
    },
}

/// Failures while parsing or validating an experiment configuration.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown config key `{key}`")]
    UnknownKey { key: String },
    #[error("config key `{key}`: cannot parse {value:?} as {expected}")]
    TypeMismatch {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("config key `{key}` violates constraint {constraint}")]
    Constraint {
        key: &'static str,
        constraint: &'static str,
    },
}
