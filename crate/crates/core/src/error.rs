use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every fallible operation in the crate.
///
/// The variants map one-to-one onto the CLI exit codes (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("resource limit exceeded: {what} = {value} (cap {cap})")]
    Resource {
        what: &'static str,
        value: u128,
        cap: u128,
    },

    #[error("{path}:{line}: {msg}")]
    DataFormat {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("calibration rejected: {0}")]
    Calibration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn resource(what: &'static str, value: impl Into<u128>, cap: impl Into<u128>) -> Self {
        Error::Resource {
            what,
            value: value.into(),
            cap: cap.into(),
        }
    }

    pub fn format(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::DataFormat {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code: 2 parameter, 3 resource, 4 data format, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Calibration(_) => 2,
            Error::Resource { .. } => 3,
            Error::DataFormat { .. } | Error::Json(_) => 4,
            Error::Io(_) => 1,
        }
    }
}
