//! Caption evaluation metrics and the protocols used to meta-evaluate them.
//!
//! Metrics: smoothed sentence BLEU, ROUGE-L, CIDEr, a METEOR variant with
//! exact/stem/synonym matching, and Word Mover's Distance similarity over
//! word embeddings. The [`metastats`] module provides correlation and
//! significance statistics; [`harness`] loads datasets, scores them, and runs
//! correlation, forced-choice and distraction evaluations.

pub mod embeddings;
pub mod exec;
pub mod harness;
pub mod metastats;
pub mod meteor;
pub mod metric;
pub mod ngram;
pub mod report;
pub mod textprep;
pub mod wmd;

pub use exec::Execution;
pub use metric::{MetricError, MetricId, MetricScore};
