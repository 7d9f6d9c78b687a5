use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot ingest {root}: {reason}")]
    Ingest { root: PathBuf, reason: String },

    #[error("malformed dataset record at line {line}: {reason}")]
    DatasetFormat { line: usize, reason: String },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error("template {variant} not applicable: {reason}")]
    Template { variant: String, reason: String },

    #[error("masked input of {actual} tokens exceeds context limit {limit}")]
    ContextOverflow { limit: usize, actual: usize },

    #[error("cannot score an empty patch")]
    EmptyPatch,

    #[error("remote backend failed after {attempts} attempt(s): {reason}")]
    Remote { attempts: u32, reason: String },

    #[error("line {line} of {file} is outside any extracted function")]
    OutsideFunction { file: String, line: u32 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage input missing: {0}")]
    StageInput(String),

    #[error("stale working copy: {0}")]
    StaleWorkdir(String),

    #[error("validation setup error: {0}")]
    Validation(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
