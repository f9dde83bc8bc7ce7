//! Response scoring: MultiBet input, divergences, expected utility and rewards.

pub mod divergence;
pub mod evaluate;
pub mod multibet;
pub mod reward;
pub mod utility;

use thiserror::Error;

use crate::distribution::DistributionError;
use crate::samples::SampleError;
use multibet::MultiBetError;

pub use divergence::{absolute_bias, binary_criterion, kl_divergence, symmetric_kl};
pub use evaluate::{evaluate_response, OptimalResponse, ResponsePayload, ScoreRecord};
pub use multibet::{entailed_distribution, multibet_click, ButtonState, MultiBetState};
pub use reward::reward;
pub use utility::{expected_utility, UtilitySpec};

/// Pseudo-chips added to every option before computing divergences.
pub const SMOOTHING: f64 = 0.5;

/// Bernoulli parameters are clamped to `[BERNOULLI_FLOOR, 1 - BERNOULLI_FLOOR]`
/// before divergences so that certain answers stay finite.
pub const BERNOULLI_FLOOR: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("invalid utility: {0}")]
    InvalidUtility(String),
    #[error("empty response")]
    EmptyResponse,
    #[error("no samples satisfy the task conditions")]
    EmptyConditionalSupport,
    #[error(transparent)]
    Sample(SampleError),
}

impl From<SampleError> for ScoreError {
    fn from(e: SampleError) -> Self {
        match e {
            SampleError::EmptyConditionalSupport => ScoreError::EmptyConditionalSupport,
            SampleError::UnknownVariable(v) => ScoreError::SchemaMismatch(format!("unknown variable `{v}`")),
            other => ScoreError::Sample(other),
        }
    }
}

impl From<MultiBetError> for ScoreError {
    fn from(e: MultiBetError) -> Self {
        match e {
            MultiBetError::EmptyResponse => ScoreError::EmptyResponse,
            other => ScoreError::InvalidResponse(other.to_string()),
        }
    }
}

impl From<DistributionError> for ScoreError {
    fn from(e: DistributionError) -> Self {
        ScoreError::InvalidResponse(e.to_string())
    }
}
