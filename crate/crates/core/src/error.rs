use thiserror::Error;

/// Errors raised by the pricing, estimation and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("virtual valuation undefined at u = {0} (zero density)")]
    UndefinedValuation(f64),

    #[error("no root: bracket for target {target} exceeded width cap {cap}")]
    NoRoot { target: f64, cap: f64 },

    #[error("out-of-order observation: expected time {expected}, got {got}")]
    Sequencing { expected: u64, got: u64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
