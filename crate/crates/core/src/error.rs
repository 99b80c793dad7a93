use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input value lies outside its admissible domain.
    #[error("rejected input: {0}")]
    InvalidInput(String),

    #[error("numeric fault: {0}")]
    NumericFault(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate layer {layer}: all weights are zero")]
    DegenerateLayer { layer: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("integer overflow in {0}")]
    Overflow(String),

    /// Evaluation reports that do not share a start/goal set.
    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}
