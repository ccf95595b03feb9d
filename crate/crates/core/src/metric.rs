//! Metric identifiers and score values shared across modules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("at least one non-empty reference is required")]
    NoReferences,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
}

/// Which metric produced a score. External scores (e.g. SPICE computed
/// elsewhere) carry their column name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum MetricId {
    Bleu,
    RougeL,
    Cider,
    Meteor,
    Wmd,
    External(String),
    /// Min-max normalized mean of other metrics, under a user-chosen name.
    Combined(String),
}

impl MetricId {
    /// Upper end of the metric's range: 10 for CIDEr, 1 for the rest.
    pub fn upper_bound(&self) -> Option<f64> {
        match self {
            MetricId::Cider => Some(10.0),
            MetricId::External(_) => None,
            _ => Some(1.0),
        }
    }

    pub fn is_external(&self) -> bool {
        matches!(self, MetricId::External(_))
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricId::Bleu => f.write_str("bleu"),
            MetricId::RougeL => f.write_str("rouge_l"),
            MetricId::Cider => f.write_str("cider"),
            MetricId::Meteor => f.write_str("meteor"),
            MetricId::Wmd => f.write_str("wmd"),
            MetricId::External(name) => write!(f, "external:{name}"),
            MetricId::Combined(name) => write!(f, "combined:{name}"),
        }
    }
}

impl FromStr for MetricId {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lowered = s.trim().to_lowercase();
        if let Some(name) = lowered.strip_prefix("external:") {
            if name.is_empty() {
                return Err(MetricError::UnknownMetric(s.to_string()));
            }
            return Ok(MetricId::External(name.to_string()));
        }
        if let Some(name) = lowered.strip_prefix("combined:") {
            if name.is_empty() {
                return Err(MetricError::UnknownMetric(s.to_string()));
            }
            return Ok(MetricId::Combined(name.to_string()));
        }
        match lowered.as_str() {
            "bleu" => Ok(MetricId::Bleu),
            "rouge" | "rouge_l" | "rouge-l" | "rougel" => Ok(MetricId::RougeL),
            "cider" => Ok(MetricId::Cider),
            "meteor" => Ok(MetricId::Meteor),
            "wmd" => Ok(MetricId::Wmd),
            _ => Err(MetricError::UnknownMetric(s.to_string())),
        }
    }
}

impl From<MetricId> for String {
    fn from(id: MetricId) -> Self {
        id.to_string()
    }
}

impl TryFrom<String> for MetricId {
    type Error = MetricError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

/// A single metric value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub metric: MetricId,
    pub value: f64,
}

impl MetricScore {
    pub fn new(metric: MetricId, value: f64) -> Self {
        debug_assert!(
            metric.upper_bound().is_none_or(|hi| (0.0..=hi + 1e-9).contains(&value)),
            "{metric} out of range: {value}"
        );
        Self { metric, value }
    }
}
