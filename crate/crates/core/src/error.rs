use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    /// A fixed-point time is not precise enough for the requested phases.
    #[error("insufficient precision: {0}")]
    InsufficientPrecision(String),

    /// A time description cannot supply enough convergents.
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("grid of {grid} points aliases a polynomial of degree {degree}")]
    Aliasing { grid: usize, degree: u64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("post-condition failed: {0}")]
    Postcondition(String),
}

impl Error {
    /// True for the precision family, which the CLI maps to its own exit code.
    pub fn is_precision(&self) -> bool {
        matches!(
            self,
            Error::InsufficientPrecision(_) | Error::PrecisionExhausted(_) | Error::Budget(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
