use thiserror::Error;

/// Errors raised by the tracking library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate density: {0}")]
    Degenerate(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("bearing undefined: target coincides with receiver {receiver}")]
    UndefinedBearing { receiver: u32 },

    #[error("invalid selection request: {0}")]
    Selection(String),

    #[error("missing measurement set for receiver {0}")]
    MissingMeasurements(u32),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
