//! METEOR-style unigram alignment scoring.
//!
//! Alignment runs in three stages (exact surface form, Porter stem,
//! synonym lexicon). Each stage walks the unmatched candidate tokens left to
//! right and pairs each with the unmatched reference position that yields
//! the fewest chunks, breaking ties by the smallest reference index.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{MetricError, MetricId, MetricScore};
use crate::textprep::{stem, TokenizedCaption};

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("failed to read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Groups of mutually synonymous tokens. A token listed in several groups
/// joins them into one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    group_of: HashMap<String, usize>,
}

impl SynonymLexicon {
    pub fn from_groups<G, I, S>(groups: G) -> Self
    where
        G: IntoIterator<Item = I>,
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut parent: Vec<usize> = Vec::new();
        let mut id_of: HashMap<String, usize> = HashMap::new();

        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }

        for group in groups {
            let group_id = parent.len();
            parent.push(group_id);
            for token in group {
                let token = token.as_ref().to_lowercase();
                match id_of.get(&token) {
                    Some(&existing) => {
                        let (a, b) = (find(&mut parent, existing), find(&mut parent, group_id));
                        parent[a.max(b)] = a.min(b);
                    }
                    None => {
                        id_of.insert(token, group_id);
                    }
                }
            }
        }
        let group_of = id_of.into_iter().map(|(t, g)| (t, find(&mut parent, g))).collect();
        Self { group_of }
    }

    /// One group per line, tokens separated by whitespace.
    pub fn parse(text: &str) -> Self {
        Self::from_groups(
            text.lines().map(str::trim).filter(|l| !l.is_empty()).map(|l| l.split_whitespace().collect::<Vec<_>>()),
        )
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| LexiconError::Io { path: path.display().to_string(), source })?;
        Ok(Self::parse(&text))
    }

    pub fn are_synonyms(&self, a: &str, b: &str) -> bool {
        a == b || matches!((self.group_of.get(a), self.group_of.get(b)), (Some(x), Some(y)) if x == y)
    }

    pub fn len(&self) -> usize {
        self.group_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group_of.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MatchStage {
    Exact,
    Stem,
    Synonym,
}

/// One-to-one pairs `(candidate_index, reference_index)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Alignment {
    pairs: BTreeSet<(usize, usize)>,
    stages: Vec<(usize, MatchStage)>,
}

impl Alignment {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Stage that matched the given candidate position, if any.
    pub fn stage_of(&self, candidate_index: usize) -> Option<MatchStage> {
        self.stages.iter().find(|(i, _)| *i == candidate_index).map(|(_, s)| *s)
    }

    pub fn chunks(&self) -> usize {
        count_chunks(&self.pairs)
    }
}

/// Maximal runs of pairs contiguous and in the same order on both sides.
fn count_chunks(pairs: &BTreeSet<(usize, usize)>) -> usize {
    let mut chunks = 0;
    let mut prev: Option<(usize, usize)> = None;
    for &(c, r) in pairs {
        match prev {
            Some((pc, pr)) if c == pc + 1 && r == pr + 1 => {}
            _ => chunks += 1,
        }
        prev = Some((c, r));
    }
    chunks
}

type Matcher<'a> = Box<dyn Fn(usize, usize) -> bool + 'a>;

pub fn align(candidate: &TokenizedCaption, reference: &TokenizedCaption, lex: Option<&SynonymLexicon>) -> Alignment {
    let cand = candidate.tokens();
    let refs = reference.tokens();
    let cand_stems: Vec<String> = cand.iter().map(|t| stem(t)).collect();
    let ref_stems: Vec<String> = refs.iter().map(|t| stem(t)).collect();

    let mut alignment = Alignment::default();
    let mut cand_used = vec![false; cand.len()];
    let mut ref_used = vec![false; refs.len()];

    let mut stages: Vec<(MatchStage, Matcher<'_>)> = vec![
        (MatchStage::Exact, Box::new(|i, j| cand[i] == refs[j])),
        (MatchStage::Stem, Box::new(|i, j| cand_stems[i] == ref_stems[j])),
    ];
    if let Some(lex) = lex {
        stages.push((MatchStage::Synonym, Box::new(move |i, j| lex.are_synonyms(&cand[i], &refs[j]))));
    }

    for (stage, matches) in &stages {
        for (i, used) in cand_used.iter_mut().enumerate() {
            if *used {
                continue;
            }
            let best = (0..refs.len()).filter(|&j| !ref_used[j] && matches(i, j)).min_by_key(|&j| {
                let mut trial = alignment.pairs.clone();
                trial.insert((i, j));
                (count_chunks(&trial), j)
            });
            if let Some(j) = best {
                alignment.pairs.insert((i, j));
                alignment.stages.push((i, *stage));
                *used = true;
                ref_used[j] = true;
            }
        }
    }
    alignment
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeteorParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for MeteorParams {
    fn default() -> Self {
        Self { alpha: 0.9, beta: 3.0, gamma: 0.5 }
    }
}

impl MeteorParams {
    pub fn validate(&self) -> Result<(), MetricError> {
        let ok = (0.0..=1.0).contains(&self.alpha)
            && self.beta.is_finite()
            && self.beta > 0.0
            && (0.0..=1.0).contains(&self.gamma);
        if ok {
            Ok(())
        } else {
            Err(MetricError::InvalidParameter(format!("meteor parameters out of range: {self:?}")))
        }
    }
}

/// Score of one candidate against one reference.
pub fn meteor_single(
    candidate: &TokenizedCaption,
    reference: &TokenizedCaption,
    lex: Option<&SynonymLexicon>,
    params: MeteorParams,
) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let alignment = align(candidate, reference, lex);
    let m = alignment.len();
    if m == 0 {
        return 0.0;
    }
    let precision = m as f64 / candidate.len() as f64;
    let recall = m as f64 / reference.len() as f64;
    let fmean = precision * recall / (params.alpha * precision + (1.0 - params.alpha) * recall);
    let penalty = params.gamma * (alignment.chunks() as f64 / m as f64).powf(params.beta);
    fmean * (1.0 - penalty)
}

/// METEOR maximized over references.
pub fn meteor(
    candidate: &TokenizedCaption,
    references: &[TokenizedCaption],
    lex: Option<&SynonymLexicon>,
    params: MeteorParams,
) -> Result<MetricScore, MetricError> {
    params.validate()?;
    if references.iter().all(TokenizedCaption::is_empty) {
        return Err(MetricError::NoReferences);
    }
    let best = references.iter().map(|r| meteor_single(candidate, r, lex, params)).fold(0.0, f64::max);
    Ok(MetricScore::new(MetricId::Meteor, best))
}
