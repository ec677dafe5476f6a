use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("vector norm {norm:e} is too small to project onto the sphere")]
    DegenerateVector { norm: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension {0} is not supported (need d >= 2)")]
    InvalidDimension(usize),
    #[error("points cancel: resultant norm {norm:e} gives no usable mean direction")]
    DegenerateMean { norm: f64 },
    #[error("empty input")]
    EmptyInput,
    #[error("zero-width cone: required concentration diverges")]
    DegenerateCone,
    #[error("rejection sampler exceeded {budget} proposals for one draw")]
    RejectionBudgetExceeded { budget: usize },
    #[error("mixture has no components")]
    EmptyMixture,
    #[error("mixture weights must be nonnegative and sum to 1 (sum = {sum})")]
    InvalidWeights { sum: f64 },
    #[error("step index {index} outside 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid length {len}: {reason}")]
    InvalidLength { len: usize, reason: &'static str },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("non-finite loss {loss} at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize, loss: f64 },
    #[error("label {0} has no class statistics")]
    UnknownLabel(usize),
    #[error("no sample falls inside any class cone")]
    EmptyAfterExclusion,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("reverse sampling failed at step {t}: {source}")]
    AtStep {
        t: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("malformed model file: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_step(self, t: usize) -> Self {
        Error::AtStep {
            t,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
