use thiserror::Error;

/// Errors raised anywhere in the simulator and the reductions built on it.
///
/// Structural and parse problems are input errors, size guards are cap
/// errors, and the rest are runtime failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Shapes, lengths or dimensions that do not line up.
    #[error("structural error: {0}")]
    Structural(String),

    /// Conditioning on an event of probability zero.
    #[error("impossible condition: {0}")]
    ImpossibleCondition(String),

    /// An enumeration or simulation guard was exceeded.
    #[error("instance too large: {what} exceeds bound {bound}")]
    InstanceTooLarge { what: String, bound: usize },

    /// A rejection sampler ran out of retries before accepting.
    #[error("retry budget of {budget} exhausted")]
    RetryBudgetExhausted { budget: u64 },

    /// A machine or adversary broke its calling contract.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn too_large(what: impl Into<String>, bound: usize) -> Self {
        Error::InstanceTooLarge {
            what: what.into(),
            bound,
        }
    }

    /// Stable machine-readable code for reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Structural(_) => "structural",
            Error::ImpossibleCondition(_) => "impossible-condition",
            Error::InstanceTooLarge { .. } => "instance-too-large",
            Error::RetryBudgetExhausted { .. } => "retry-budget-exhausted",
            Error::Protocol(_) => "protocol",
            Error::Parse(_) => "parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
