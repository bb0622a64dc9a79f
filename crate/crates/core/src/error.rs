use thiserror::Error;

/// Errors raised by graph construction, parameter validation, protocol
/// transitions and trial configuration.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("edge ({from}, {to}) has an endpoint outside 0..{n}")]
    EndpointOutOfRange { from: usize, to: usize, n: usize },

    #[error("node count mismatch: {left} vs {right}")]
    NodeCountMismatch { left: usize, right: usize },

    #[error("graph has {n} nodes; exhaustive subset check is limited to {max}")]
    GraphTooLarge { n: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty inbox: every agent must at least hear itself")]
    EmptyInbox,

    #[error("vector length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("cursor mismatch: receiver at {expected}, sender at {got}")]
    CursorMismatch { expected: usize, got: usize },

    #[error("message variant {got} not understood by protocol {protocol}")]
    UnexpectedMessage { protocol: &'static str, got: &'static str },

    #[error("invalid trial configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
