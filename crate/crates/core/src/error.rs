//! Crate-wide error type and the process exit codes the CLI maps it to.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library and the `lnop` binary.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad user input: unknown flags/keys, invalid hyperparameters,
    /// incompatible model/dataset pairings.
    #[error("config error: {0}")]
    Config(String),

    /// Tensor shape contract violated (rank, extent, or axis mismatch).
    #[error("shape error: {0}")]
    Shape(String),

    /// A NaN or infinity appeared where finite values are required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A numerical routine failed to produce a usable result
    /// (solver blow-up, iteration limit, impossible step size).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Filesystem-level failure while reading or writing an artifact.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file exists but its contents are not a valid artifact
    /// (bad magic, unsupported version, truncated payload, bad JSON).
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Process exit code for this error class:
    /// 1 = usage/config, 2 = numerical failure, 3 = I/O or format.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape(_) => 1,
            Error::NonFinite(_) | Error::Numerical(_) => 2,
            Error::Io { .. } | Error::Format(_) => 3,
        }
    }

    /// Shorthand for an I/O error tagged with the offending path.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
