use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),

    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),

    #[error("{path}: {detail}")]
    Csv { path: PathBuf, detail: String },

    #[error("sweep incomplete: {0}")]
    Incomplete(String),

    #[error("{failed} of {total} checks failed")]
    ValidationFailed { failed: usize, total: usize },

    #[error(transparent)]
    Core(#[from] soamix_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}
