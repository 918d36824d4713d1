//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid coefficient data: {0}")]
    Coefficient(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),

    #[error("step rejected: {0}")]
    StepRejected(String),

    #[error("run aborted at t = {time}: {reason}")]
    RunAborted { time: f64, reason: String },

    #[error("configuration parse error at line {line}, column {column}: {message}")]
    ConfigParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("configuration rejected:\n{}", .0.join("\n"))]
    ConfigInvalid(Vec<String>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
