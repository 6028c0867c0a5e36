//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad hyperparameters, degenerate specs,
    /// contradictory settings.
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid input handed to an operation: shape mismatches,
    /// out-of-range labels or rank ranges.
    #[error("input error: {0}")]
    Input(String),

    /// A file could not be parsed: bad CSV row, wrong magic number,
    /// truncated binary payload.
    #[error("format error in {path}:{locus}: {message}")]
    Format {
        path: String,
        /// Line number for text files, byte offset for binary ones.
        locus: String,
        message: String,
    },

    /// The training run itself failed, e.g. no example ever met the
    /// consecutive-correct criterion within the epoch budget.
    #[error("run error: {0}")]
    Run(String),

    /// Non-finite values appeared where finite math was required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An evaluation was requested that the data cannot support,
    /// e.g. measuring a noise rate without ground-truth labels.
    #[error("evaluation error: {0}")]
    Eval(String),

    /// Internal bookkeeping went inconsistent; always a bug.
    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code the CLI maps this error to.
    ///
    /// 2 = configuration, 3 = data/format, 4 = run.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Input(_)
            | Error::Format { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::Eval(_) => 3,
            Error::Run(_) | Error::Numeric(_) | Error::Internal(_) => 4,
        }
    }

    /// Short machine-readable kind tag used in the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Input(_) => "input",
            Error::Format { .. } => "format",
            Error::Run(_) => "run",
            Error::Numeric(_) => "numeric",
            Error::Eval(_) => "eval",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
