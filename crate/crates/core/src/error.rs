use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by every stage of the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// A frame file record could not be ingested.
    #[error("frame ingestion failed in {file} (record {record}): {message}")]
    Ingest {
        file: String,
        record: String,
        message: String,
    },

    /// A corpus or intermediate file is malformed.
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("role {role} is not defined for sense {sense_id}")]
    RoleUndefinedForSense { sense_id: String, role: String },

    #[error("no description for modifier role {0}")]
    UnknownModifier(String),

    #[error("unknown sense {0}")]
    UnknownSense(String),

    #[error("invalid role label {0:?}")]
    InvalidRole(String),

    /// Violated pre-condition between two components.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The external scorer went away, timed out or could not be reached.
    #[error("scorer transport error: {0}")]
    Transport(String),

    /// The external scorer answered with something that breaks the wire protocol.
    #[error("scorer protocol error: {0}")]
    Protocol(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 1 for bad configuration, 2 for data
    /// problems, 3 for scorer transport and protocol failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Transport(_) | Error::Protocol(_) => 3,
            _ => 2,
        }
    }

    pub fn is_transport(&self) -> bool {
        matches!(self, Error::Transport(_))
    }
}
