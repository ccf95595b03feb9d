use std::collections::BTreeMap;

use super::{extract_ngrams, NGram, MAX_ORDER};
use crate::metric::{MetricError, MetricId, MetricScore};
use crate::textprep::TokenizedCaption;

/// Sentence-level BLEU with add-one smoothing on orders n >= 2.
///
/// Clipping uses the per-n-gram maximum count over references; the
/// brevity penalty uses the reference length closest to the candidate
/// length (ties go to the shorter reference).
pub fn bleu(
    candidate: &TokenizedCaption,
    references: &[TokenizedCaption],
    max_n: usize,
) -> Result<MetricScore, MetricError> {
    if !(1..=MAX_ORDER).contains(&max_n) {
        return Err(MetricError::InvalidParameter(format!("bleu max_n must be in 1..=4, got {max_n}")));
    }
    if references.iter().all(TokenizedCaption::is_empty) {
        return Err(MetricError::NoReferences);
    }
    if candidate.is_empty() {
        return Ok(MetricScore::new(MetricId::Bleu, 0.0));
    }

    let cand = extract_ngrams(candidate, max_n);
    let ref_profiles: Vec<_> = references.iter().map(|r| extract_ngrams(r, max_n)).collect();

    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let mut max_ref: BTreeMap<&NGram, usize> = BTreeMap::new();
        for profile in &ref_profiles {
            for (gram, &count) in profile.order(n) {
                let slot = max_ref.entry(gram).or_insert(0);
                *slot = (*slot).max(count);
            }
        }
        let matched: usize =
            cand.order(n).iter().map(|(gram, &count)| count.min(max_ref.get(gram).copied().unwrap_or(0))).sum();
        let total = cand.total(n);

        let precision = if n == 1 {
            if matched == 0 {
                return Ok(MetricScore::new(MetricId::Bleu, 0.0));
            }
            matched as f64 / total as f64
        } else {
            (matched as f64 + 1.0) / (total as f64 + 1.0)
        };
        log_sum += precision.ln();
    }

    let c = candidate.len();
    let r = closest_ref_len(c, references);
    let bp = if c >= r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    let score = bp * (log_sum / max_n as f64).exp();
    Ok(MetricScore::new(MetricId::Bleu, score.min(1.0)))
}

fn closest_ref_len(cand_len: usize, references: &[TokenizedCaption]) -> usize {
    references
        .iter()
        .map(TokenizedCaption::len)
        .filter(|&l| l > 0)
        .min_by_key(|&l| (l.abs_diff(cand_len), l))
        .expect("at least one non-empty reference")
}
