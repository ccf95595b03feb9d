//! N-gram overlap metrics: smoothed BLEU, ROUGE-L and CIDEr.

mod bleu;
mod cider;
mod rouge;

use std::collections::BTreeMap;

use crate::textprep::TokenizedCaption;

pub use bleu::bleu;
pub use cider::{build_idf, cider, cider_per_order, IdfError, IdfTable};
pub use rouge::{lcs_len, rouge_l};

pub const MAX_ORDER: usize = 4;

pub type NGram = Vec<String>;

/// Counts of every n-gram of order `1..=max_n` in one caption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramProfile {
    orders: Vec<BTreeMap<NGram, usize>>,
}

impl NGramProfile {
    pub fn max_n(&self) -> usize {
        self.orders.len()
    }

    /// Counts of order `n` (1-based).
    pub fn order(&self, n: usize) -> &BTreeMap<NGram, usize> {
        &self.orders[n - 1]
    }

    /// Total n-gram count of order `n`, i.e. `max(len - n + 1, 0)`.
    pub fn total(&self, n: usize) -> usize {
        self.order(n).values().sum()
    }

    pub fn count(&self, gram: &[String]) -> usize {
        match gram.len() {
            0 => 0,
            n if n > self.max_n() => 0,
            n => self.order(n).get(gram).copied().unwrap_or(0),
        }
    }
}

/// Sliding-window n-gram counts. `max_n` is clamped to `1..=4`.
pub fn extract_ngrams(caption: &TokenizedCaption, max_n: usize) -> NGramProfile {
    let max_n = max_n.clamp(1, MAX_ORDER);
    let tokens = caption.tokens();
    let orders = (1..=max_n)
        .map(|n| {
            let mut counts = BTreeMap::new();
            for window in tokens.windows(n) {
                *counts.entry(window.to_vec()).or_insert(0) += 1;
            }
            counts
        })
        .collect();
    NGramProfile { orders }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(s: &str) -> NGram {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn counts_small_caption() {
        let p = extract_ngrams(&TokenizedCaption::from_words("a b a"), 2);
        assert_eq!(p.count(&g("a")), 2);
        assert_eq!(p.count(&g("b")), 1);
        assert_eq!(p.count(&g("a b")), 1);
        assert_eq!(p.count(&g("b a")), 1);
        assert_eq!(p.order(1).len() + p.order(2).len(), 4);
    }

    #[test]
    fn short_caption_has_only_low_orders() {
        let p = extract_ngrams(&TokenizedCaption::from_words("a"), 4);
        assert_eq!(p.count(&g("a")), 1);
        for n in 2..=4 {
            assert!(p.order(n).is_empty());
        }
    }

    #[test]
    fn repeated_token() {
        let p = extract_ngrams(&TokenizedCaption::from_words("a a a a"), 2);
        assert_eq!(p.count(&g("a")), 4);
        assert_eq!(p.count(&g("a a")), 3);
    }

    proptest::proptest! {
        #[test]
        fn totals_match_window_count(words in proptest::collection::vec("[abc]", 0..12), max_n in 1usize..=4) {
            let caption = TokenizedCaption::from_tokens(&words);
            let p = extract_ngrams(&caption, max_n);
            for n in 1..=max_n {
                proptest::prop_assert_eq!(p.total(n), (words.len() + 1).saturating_sub(n));
                proptest::prop_assert!(p.order(n).values().all(|&c| c >= 1));
            }
        }
    }
}
