use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = VodError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum VodError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl VodError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        VodError::InvalidArgument(msg.into())
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err($crate::error::VodError::InvalidArgument(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
