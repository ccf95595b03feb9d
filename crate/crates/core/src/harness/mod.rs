//! Dataset loading, batch scoring, and the three evaluation protocols:
//! correlation with human judgments, forced-choice accuracy, and
//! robustness to distractor captions.

mod correlate;
mod dataset;
mod protocols;
mod scoring;

use thiserror::Error;

use crate::metastats::StatsError;

pub use correlate::{
    correlation_report, judgment_column, CorrelationBlock, CorrelationReport, JudgmentColumn, MetricCorrelation,
    MetricMatrix, WilliamsMatrix, WIN_THRESHOLD,
};
pub use dataset::{
    load_distraction, load_judged_dataset, load_triplets, parse_distraction, parse_judged, parse_triplets, Choice,
    DistractionInstance, Distractor, DistractorCategory, EvalInstance, PairCategory, TripletInstance,
};
pub use protocols::{
    distraction_accuracy, distraction_corpus, distraction_csv, distraction_from_trials, distraction_json,
    distraction_trials, forced_choice_accuracy, forced_choice_csv, forced_choice_from_scores, forced_choice_json,
    triplet_corpus, CategoryTally, DistractionReport, DistractionTrial, ForcedChoiceReport,
};
pub use scoring::{
    reference_corpus, score_dataset, sha256_hex, Cell, ExternalScores, Resources, ScoreRow, ScoreTable, Scorer,
    ScoringConfig,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("scoring `{id}` with {metric} failed: {message}")]
    Score { id: String, metric: String, message: String },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("write failed: {0}")]
    Io(String),
}

impl HarnessError {
    pub fn is_config(&self) -> bool {
        matches!(self, HarnessError::Config(_))
    }
}
