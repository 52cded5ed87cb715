use alloc::boxed::Box;
use alloc::string::String;

use crate::solver::SolutionStore;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} = {value} is outside the admissible range {range}")]
    OutOfRange { what: &'static str, value: f64, range: String },

    #[error("grid spacing mismatch: {left} vs {right}")]
    SpacingMismatch { left: f64, right: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("time step {dt} exceeds the stable limit {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("kernel violates the standing assumptions: {0}")]
    KernelAssumption(String),

    /// The integration produced a non-finite value. `last_good` holds every
    /// snapshot and ledger row accepted before the failing step.
    #[error("solution became non-finite at t = {t}")]
    Diverged { t: f64, last_good: Box<SolutionStore> },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn range(what: &'static str, value: f64, range: &str) -> Self {
        Error::OutOfRange { what, value, range: range.into() }
    }
}
