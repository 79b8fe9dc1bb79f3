use std::path::PathBuf;

use thiserror::Error;

/// Failure categories shared by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A configuration document is invalid or incomplete.
    #[error("config error: {0}")]
    Config(String),
    /// A request that cannot be satisfied (e.g. more distinct cells than the grid has).
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// A least-squares system without a unique solution.
    #[error("ill-posed: {0}")]
    IllPosed(String),
    /// Training or evaluation produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// A malformed input file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    /// A failure inside one benchmark run, annotated with where it happened.
    #[error("run {run}, variant {variant}: {source}")]
    Run {
        run: usize,
        variant: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Strips run annotations to reach the underlying failure.
    pub fn root(&self) -> &Error {
        match self {
            Error::Run { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
