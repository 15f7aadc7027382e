use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every stage of the toolkit.
///
/// The variants are grouped by what the caller can do about them: configuration
/// problems are fixed by editing a config or manifest, data problems by fixing
/// the input, provider problems by fixing the remote service.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid rule `{rule}`: {reason}")]
    Rule { rule: String, reason: String },

    #[error("record {id}: {reason}")]
    Record { id: String, reason: String },

    #[error("{path}:{line}: {reason}")]
    Decode {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("schema error: missing field(s) {}", .0.join(", "))]
    Schema(Vec<String>),

    #[error("{0}")]
    Data(String),

    #[error("provider error: {0}")]
    Provider(String),

    #[error("calculator: {0}")]
    Calc(#[from] crate::calc::CalcError),

    #[error("truncated after {rounds} tool round(s) with an unfilled marker")]
    ToolTruncated { rounds: usize, partial: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn record(id: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Record {
            id: id.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Rule { .. } => 2,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
