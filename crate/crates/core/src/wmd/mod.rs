//! Word Mover's Distance between captions.
//!
//! Captions become normalized bag-of-words documents (stopwords removed,
//! out-of-vocabulary tokens dropped), the distance is the exact optimum of
//! the transportation problem with Euclidean embedding costs, and the
//! similarity is `exp(-scale * distance)`.

mod transport;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::{euclidean, EmbeddingError, EmbeddingTable};
use crate::metric::{MetricError, MetricId, MetricScore};
use crate::textprep::{StopwordList, TokenizedCaption};

pub use transport::{solve_transport, TransportError, TransportSolution, CERTIFICATE_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WmdError {
    #[error("document is empty after stopword and out-of-vocabulary removal (dropped: {dropped:?})")]
    EmptyDocument { dropped: Vec<String> },
    #[error("every reference is empty after stopword and out-of-vocabulary removal")]
    AllReferencesDegenerate,
    #[error("word `{0}` is not in the embedding table")]
    Missing(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl From<EmbeddingError> for WmdError {
    fn from(e: EmbeddingError) -> Self {
        match e {
            EmbeddingError::Missing(w) => WmdError::Missing(w),
            other => WmdError::Missing(other.to_string()),
        }
    }
}

/// Normalized bag of words: distinct tokens (sorted) with weights summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct NbowDocument {
    words: Vec<String>,
    weights: Vec<f64>,
}

impl NbowDocument {
    /// Builds a document from token counts. Zero counts are ignored.
    pub fn from_counts<I, S>(counts: I) -> Option<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut merged: BTreeMap<String, usize> = BTreeMap::new();
        for (w, c) in counts {
            if c > 0 {
                *merged.entry(w.into()).or_insert(0) += c;
            }
        }
        let total: usize = merged.values().sum();
        if total == 0 {
            return None;
        }
        let (words, weights) = merged.into_iter().map(|(w, c)| (w, c as f64 / total as f64)).unzip();
        Some(Self { words, weights })
    }

    /// Builds a document from explicit weights, renormalizing them to sum to 1.
    pub fn from_weights<I, S>(entries: I) -> Option<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut merged: BTreeMap<String, f64> = BTreeMap::new();
        for (w, x) in entries {
            if x > 0.0 && x.is_finite() {
                *merged.entry(w.into()).or_insert(0.0) += x;
            }
        }
        let total: f64 = merged.values().sum();
        if merged.is_empty() || total <= 0.0 {
            return None;
        }
        let (words, weights) = merged.into_iter().map(|(w, x)| (w, x / total)).unzip();
        Some(Self { words, weights })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// nBOW document plus the out-of-vocabulary tokens that were dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Nbow {
    pub document: NbowDocument,
    pub dropped: Vec<String>,
}

/// Removes stopwords, drops tokens missing from `table`, and normalizes counts.
pub fn nbow(caption: &TokenizedCaption, table: &EmbeddingTable, stop: &StopwordList) -> Result<Nbow, WmdError> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut dropped = Vec::new();
    for token in caption.tokens().iter().filter(|t| !stop.contains(t)) {
        if table.contains(token) {
            *counts.entry(token).or_insert(0) += 1;
        } else {
            dropped.push(token.clone());
        }
    }
    match NbowDocument::from_counts(counts) {
        Some(document) => Ok(Nbow { document, dropped }),
        None => Err(WmdError::EmptyDocument { dropped }),
    }
}

/// Sparse optimal flow between two documents.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMatrix {
    /// `(source_index, target_index, amount, cost)`.
    pub entries: Vec<(usize, usize, f64, f64)>,
}

impl FlowMatrix {
    pub fn row_sums(&self, rows: usize) -> Vec<f64> {
        let mut sums = vec![0.0; rows];
        for &(i, _, t, _) in &self.entries {
            sums[i] += t;
        }
        sums
    }

    pub fn col_sums(&self, cols: usize) -> Vec<f64> {
        let mut sums = vec![0.0; cols];
        for &(_, j, t, _) in &self.entries {
            sums[j] += t;
        }
        sums
    }

    /// TSV matching report: `source<TAB>target<TAB>flow<TAB>cost`.
    pub fn to_tsv(&self, source: &NbowDocument, target: &NbowDocument) -> String {
        let mut out = String::from("source\ttarget\tflow\tcost\n");
        for &(i, j, t, c) in &self.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                source.words[i],
                target.words[j],
                crate::report::fmt_sig(t),
                crate::report::fmt_sig(c)
            );
        }
        out
    }
}

/// Optimal transport between two documents; `similarity = exp(-distance)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WmdResult {
    pub distance: f64,
    pub similarity: f64,
    pub flow: FlowMatrix,
    pub slackness_residual: f64,
}

/// Exact Earth Mover's Distance between two nBOW documents.
pub fn emd(source: &NbowDocument, target: &NbowDocument, table: &EmbeddingTable) -> Result<WmdResult, WmdError> {
    if source.is_empty() || target.is_empty() {
        return Err(WmdError::EmptyDocument { dropped: Vec::new() });
    }
    let lookup = |w: &String| table.get(w).ok_or_else(|| WmdError::Missing(w.clone()));
    let src_vecs = source.words.iter().map(lookup).collect::<Result<Vec<_>, _>>()?;
    let tgt_vecs = target.words.iter().map(lookup).collect::<Result<Vec<_>, _>>()?;
    let cost: Vec<f64> = src_vecs.iter().flat_map(|a| tgt_vecs.iter().map(move |b| euclidean(a, b))).collect();

    let solution = solve_transport(&source.weights, &target.weights, &cost)?;
    let n = target.len();
    let entries = solution.flows.iter().map(|&(i, j, t)| (i, j, t, cost[i * n + j])).collect();
    let distance = solution.cost.max(0.0);
    Ok(WmdResult {
        distance,
        similarity: (-distance).exp(),
        flow: FlowMatrix { entries },
        slackness_residual: solution.slackness_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WmdParams {
    /// Similarity is `exp(-scale * distance)`.
    pub scale: f64,
    pub aggregation: Aggregation,
}

impl Default for WmdParams {
    fn default() -> Self {
        Self { scale: 1.0, aggregation: Aggregation::Max }
    }
}

/// Similarity outcome; `degenerate` marks a candidate whose nBOW was empty.
#[derive(Debug, Clone, PartialEq)]
pub struct WmdScore {
    pub score: MetricScore,
    pub degenerate: bool,
    pub dropped: Vec<String>,
}

/// `exp(-scale · WMD)` against each reference, aggregated (max by default).
/// Empty-document references are skipped; an empty candidate scores 0.
pub fn wmd_similarity(
    candidate: &TokenizedCaption,
    references: &[TokenizedCaption],
    table: &EmbeddingTable,
    stop: &StopwordList,
    params: WmdParams,
) -> Result<WmdScore, WmdError> {
    if !(params.scale > 0.0 && params.scale.is_finite()) {
        return Err(MetricError::InvalidParameter(format!("wmd scale must be positive, got {}", params.scale)).into());
    }
    if references.is_empty() {
        return Err(MetricError::NoReferences.into());
    }
    let ref_docs: Vec<NbowDocument> =
        references.iter().filter_map(|r| nbow(r, table, stop).ok().map(|n| n.document)).collect();
    if ref_docs.is_empty() {
        return Err(WmdError::AllReferencesDegenerate);
    }
    let cand = match nbow(candidate, table, stop) {
        Ok(n) => n,
        Err(WmdError::EmptyDocument { dropped }) => {
            return Ok(WmdScore { score: MetricScore::new(MetricId::Wmd, 0.0), degenerate: true, dropped });
        }
        Err(e) => return Err(e),
    };

    let mut sims = Vec::with_capacity(ref_docs.len());
    for doc in &ref_docs {
        let distance = if *doc == cand.document { 0.0 } else { emd(&cand.document, doc, table)?.distance };
        sims.push((-params.scale * distance).exp());
    }
    let value = match params.aggregation {
        Aggregation::Max => sims.iter().copied().fold(0.0, f64::max),
        Aggregation::Mean => sims.iter().sum::<f64>() / sims.len() as f64,
    };
    Ok(WmdScore {
        score: MetricScore::new(MetricId::Wmd, value.clamp(0.0, 1.0)),
        degenerate: false,
        dropped: cand.dropped,
    })
}
