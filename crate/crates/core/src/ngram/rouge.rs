use crate::metric::{MetricError, MetricId, MetricScore};
use crate::textprep::TokenizedCaption;

/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if x == y { prev[j] + 1 } else { curr[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// ROUGE-L F-measure, maximized over references.
pub fn rouge_l(
    candidate: &TokenizedCaption,
    references: &[TokenizedCaption],
    beta: f64,
) -> Result<MetricScore, MetricError> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(MetricError::InvalidParameter(format!("rouge beta must be positive, got {beta}")));
    }
    if references.iter().all(TokenizedCaption::is_empty) {
        return Err(MetricError::NoReferences);
    }
    if candidate.is_empty() {
        return Ok(MetricScore::new(MetricId::RougeL, 0.0));
    }
    let beta2 = beta * beta;
    let best = references
        .iter()
        .filter(|r| !r.is_empty())
        .map(|r| {
            let lcs = lcs_len(candidate.tokens(), r.tokens()) as f64;
            let recall = lcs / r.len() as f64;
            let precision = lcs / candidate.len() as f64;
            if recall + precision == 0.0 {
                0.0
            } else {
                ((1.0 + beta2) * recall * precision) / (recall + beta2 * precision)
            }
        })
        .fold(0.0, f64::max);
    Ok(MetricScore::new(MetricId::RougeL, best))
}
