use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not a directory: {0}")]
    NotADirectory(PathBuf),

    #[error("no manifest, interaction model or back-end source found under {0}")]
    EmptyPackage(PathBuf),

    #[error("malformed manifest: {0}")]
    MalformedManifest(String),

    #[error("malformed interaction model: {0}")]
    MalformedModel(String),

    #[error("invalid rules file: {0}")]
    Rules(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("HTTP client error: {0}")]
    Http(String),

    #[error("cannot start worker threads: {0}")]
    ThreadPool(String),

    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
