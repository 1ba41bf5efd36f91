use thiserror::Error;

/// Crate-wide error type. The CLI maps variants to exit codes
/// (config 2, numeric 3, I/O 4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {message}")]
    Parameter { name: &'static str, message: String },

    #[error("numeric failure in {context}: {message}")]
    Numeric { context: &'static str, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parameter(name: &'static str, message: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            message: message.into(),
        }
    }

    pub fn numeric(context: &'static str, message: impl Into<String>) -> Self {
        Error::Numeric {
            context,
            message: message.into(),
        }
    }

    /// Process exit code for the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter { .. } | Error::Config(_) => 2,
            Error::Numeric { .. } => 3,
            Error::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
