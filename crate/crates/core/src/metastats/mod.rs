//! Meta-evaluation statistics: correlation coefficients, the Williams test
//! for dependent correlations, and min-max score combination.

mod combine;
mod correlation;
mod tdist;
mod williams;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use combine::{combine, minmax_normalize, Normalized};
pub use correlation::{correlations, kendall, pearson, ranks, spearman, CorrelationKind, CorrelationResult};
pub use tdist::{ln_gamma, regularized_incomplete_beta, t_cdf};
pub use williams::{williams_test, WilliamsResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("values must be finite")]
    NonFinite,
    #[error("correlation undefined: an input has zero variance")]
    ZeroVariance,
    #[error("instance ids differ at position {index}: `{left}` vs `{right}`")]
    IdMismatch { index: usize, left: String, right: String },
    #[error("williams test needs n >= 4, got {0}")]
    DegenerateDf(usize),
    #[error("correlation {0} is outside [-1, 1]")]
    OutOfRange(f64),
    #[error("williams denominator not positive (K = {k}, r12 = {r12}, r13 = {r13}, r23 = {r23}, n = {n})")]
    Domain { k: f64, r12: f64, r13: f64, r23: f64, n: usize },
    #[error("{0}")]
    InvalidWeights(String),
}

/// Scores for a set of instances, aligned by position with their ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub ids: Vec<String>,
    pub values: Vec<f64>,
}

impl ScoreVector {
    pub fn new(ids: Vec<String>, values: Vec<f64>) -> Result<Self, StatsError> {
        if ids.len() != values.len() {
            return Err(StatsError::LengthMismatch { left: ids.len(), right: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        Ok(Self { ids, values })
    }

    /// Ids `0..n` as strings.
    pub fn from_values(values: Vec<f64>) -> Result<Self, StatsError> {
        let ids = (0..values.len()).map(|i| i.to_string()).collect();
        Self::new(ids, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Errors with the first position whose id differs from `other`.
    pub fn check_aligned(&self, other: &ScoreVector) -> Result<(), StatsError> {
        if self.len() != other.len() {
            return Err(StatsError::LengthMismatch { left: self.len(), right: other.len() });
        }
        match self.ids.iter().zip(&other.ids).position(|(a, b)| a != b) {
            Some(index) => {
                Err(StatsError::IdMismatch { index, left: self.ids[index].clone(), right: other.ids[index].clone() })
            }
            None => Ok(()),
        }
    }
}

pub(crate) fn check_pair(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(StatsError::TooShort { needed: 2, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}
