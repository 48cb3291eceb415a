use std::io;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the library.
///
/// The variants are coarse on purpose: callers dispatch on the class of
/// failure (malformed input file, impossible configuration, arithmetic
/// overflow) and the message carries the specifics.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A file or byte stream does not match the expected on-disk layout.
    #[error("format error: {0}")]
    Format(String),

    /// Tensor or layer dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// A network description, accelerator setup, or parameter set is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// A partial sum left the signed 16-bit range where saturation is not
    /// defined behavior.
    #[error("overflow: {0}")]
    Overflow(String),

    /// Threshold calibration could not reach the requested density.
    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Prefixes the message with `ctx`, keeping the variant.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::Format(m) => Error::Format(format!("{ctx}: {m}")),
            Error::Shape(m) => Error::Shape(format!("{ctx}: {m}")),
            Error::Config(m) => Error::Config(format!("{ctx}: {m}")),
            Error::Overflow(m) => Error::Overflow(format!("{ctx}: {m}")),
            Error::Calibration(m) => Error::Calibration(format!("{ctx}: {m}")),
            Error::Io(e) => Error::Io(e),
        }
    }
}
