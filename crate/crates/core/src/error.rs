use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration field failed validation.
    #[error("invalid configuration field `{field}`: {message}")]
    Config { field: String, message: String },

    /// The exact enumeration would exceed the configured number of symbol bits.
    #[error(
        "enumeration cap exceeded: K(L+1) = {bits} symbol bits, cap is {cap}; \
         use the Monte-Carlo simulator for this configuration"
    )]
    EnumerationCap { bits: usize, cap: usize },

    /// Two inputs disagree in size (TX count, tree depth, ...).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A mechanism was requested in a configuration it does not support.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
