use thiserror::Error;

/// Errors reported by the samplers, kernels and estimators of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("epsilon {0} is outside (0, 1]")]
    EpsilonOutOfRange(f64),

    #[error("Hermite order {0} exceeds the supported maximum of 64")]
    OrderTooLarge(usize),

    #[error("He_{order}(-1/sqrt(eps)) vanishes at eps = {epsilon}")]
    HermiteZero { order: usize, epsilon: f64 },

    #[error("invalid proposal state")]
    InvalidProposal,

    #[error("transition probability {0} exceeds 1: truncation bound violated")]
    TruncationViolated(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fit did not converge after {0} iterations")]
    FitNonConvergence(usize),

    #[error("degenerate input curve: {0}")]
    DegenerateCurve(String),

    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("calibration bracket failure: {0}")]
    BracketFailure(String),

    #[error("{n} units is too large for exact enumeration (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("zero denominator in {0}")]
    ZeroDenominator(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= 1.0 {
        Ok(())
    } else {
        Err(Error::EpsilonOutOfRange(epsilon))
    }
}
