use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepBudgetExhausted { t: f64, max_steps: usize },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("series too short: {len} samples cannot hold an embedding spanning {span}")]
    SeriesTooShort { len: usize, span: usize },

    #[error("degenerate input: all pairwise distances are equal ({distance})")]
    DegenerateDistances { distance: f64 },

    #[error("degenerate series at node {node}")]
    DegenerateSeries { node: usize },

    #[error("need at least {needed} series, got {got}")]
    TooFewSeries { needed: usize, got: usize },

    #[error("partition does not match network: {0}")]
    PartitionMismatch(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures that come from the numerical integration itself.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepUnderflow { .. }
                | Error::StepBudgetExhausted { .. }
                | Error::NonFiniteState { .. }
        )
    }
}
