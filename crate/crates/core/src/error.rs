use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("orbit index {index} outside window [{lo}, {hi}]")]
    OutOfWindow { index: i64, lo: i64, hi: i64 },

    #[error("lift `{label}` is not strictly increasing near x = {x}")]
    NonMonotoneLift { label: String, x: f64 },

    #[error("preimage bisection did not converge on branch {branch} of `{label}` (target {target})")]
    PreimageNonConvergence { label: String, branch: usize, target: f64 },

    #[error("nonpositive derivative {value} of `{label}` at x = {x}")]
    NonpositiveDerivative { label: String, x: f64, value: f64 },

    #[error("grid function is outside the cone: {0}")]
    OutsideCone(String),

    #[error("preimage-tree budget exceeded: {leaves} leaves > {budget}")]
    BudgetExceeded { leaves: f64, budget: f64 },

    #[error("reference measure mass collapsed (underflow) at depth {depth}")]
    MassCollapse { depth: usize },

    #[error("power iteration stagnated after {iterations} iterations (residual {residual:e})")]
    Stagnation { iterations: usize, residual: f64 },

    #[error("hypothesis failure: {0}")]
    Hypothesis(String),

    #[error("no hyperbolic times found in {horizon} iterates")]
    NoHyperbolicTimes { horizon: usize },

    #[error("cover construction failed: {0}")]
    Cover(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("exactness failure: interval did not cover the circle within {cap} iterates")]
    NotExact { cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
