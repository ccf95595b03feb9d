//! Forced-choice and distraction protocols. Both count a success only when
//! the preferred caption scores strictly higher; ties are failures.

use std::collections::BTreeMap;

use serde_json::json;

use super::dataset::{Choice, DistractionInstance, DistractorCategory, PairCategory, TripletInstance};
use super::scoring::{rounded, tokenize_all, Scorer};
use super::HarnessError;
use crate::exec::Execution;
use crate::metric::MetricId;
use crate::report::fmt_sig;
use crate::textprep::{tokenize, TokenizedCaption};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CategoryTally {
    pub successes: usize,
    pub trials: usize,
}

impl CategoryTally {
    pub fn accuracy(&self) -> Option<f64> {
        (self.trials > 0).then(|| self.successes as f64 / self.trials as f64)
    }

    fn record(&mut self, success: bool) {
        self.trials += 1;
        self.successes += usize::from(success);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForcedChoiceReport {
    pub metric: MetricId,
    pub categories: BTreeMap<PairCategory, CategoryTally>,
}

impl ForcedChoiceReport {
    pub fn accuracy(&self, category: PairCategory) -> Option<f64> {
        self.categories.get(&category).and_then(CategoryTally::accuracy)
    }

    /// Mean of the per-category accuracies over the categories present.
    pub fn average(&self) -> f64 {
        let accs: Vec<f64> = self.categories.values().filter_map(CategoryTally::accuracy).collect();
        if accs.is_empty() {
            0.0
        } else {
            accs.iter().sum::<f64>() / accs.len() as f64
        }
    }
}

/// Tallies triplets given each one's `(score_a, score_b)`.
pub fn forced_choice_from_scores(
    metric: MetricId,
    triplets: &[TripletInstance],
    scores: &[(f64, f64)],
) -> ForcedChoiceReport {
    assert_eq!(triplets.len(), scores.len(), "one score pair per triplet");
    let mut categories: BTreeMap<PairCategory, CategoryTally> = BTreeMap::new();
    for (t, &(a, b)) in triplets.iter().zip(scores) {
        let success = match t.human_choice {
            Choice::A => a > b,
            Choice::B => b > a,
        };
        categories.entry(t.category).or_default().record(success);
    }
    ForcedChoiceReport { metric, categories }
}

/// Scores both candidates of each triplet against its references. External
/// scores are looked up as `<instance_id>/a` and `<instance_id>/b`.
pub fn forced_choice_accuracy(
    triplets: &[TripletInstance],
    scorer: &Scorer,
    metric: &MetricId,
    exec: Execution,
) -> Result<ForcedChoiceReport, HarnessError> {
    let scores = exec.map(triplets, |t| {
        let refs = tokenize_all(&t.references);
        let score = |side: &str, caption| {
            let key = format!("{}/{side}", t.instance_id);
            scorer
                .score(metric, &key, &tokenize(caption), &refs)
                .map(|c| c.value)
                .map_err(|message| HarnessError::Score { id: key, metric: metric.to_string(), message })
        };
        Ok::<_, HarnessError>((score("a", &t.candidate_a)?, score("b", &t.candidate_b)?))
    });
    let scores = scores.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(forced_choice_from_scores(metric.clone(), triplets, &scores))
}

/// CIDEr corpus for triplets: each triplet's references form one document.
pub fn triplet_corpus(triplets: &[TripletInstance]) -> Vec<Vec<TokenizedCaption>> {
    triplets.iter().map(|t| tokenize_all(&t.references)).collect()
}

/// CSV in the forced-choice table layout: `metric,HC,HI,HM,MM,average`.
/// Categories without triplets are left empty.
pub fn forced_choice_csv(reports: &[ForcedChoiceReport]) -> String {
    let mut out = String::from("metric,HC,HI,HM,MM,average\n");
    for r in reports {
        out.push_str(&csv_field(&r.metric.to_string()));
        for c in PairCategory::ALL {
            out.push(',');
            out.push_str(&r.accuracy(c).map(fmt_sig).unwrap_or_default());
        }
        out.push(',');
        out.push_str(&fmt_sig(r.average()));
        out.push('\n');
    }
    out
}

pub fn forced_choice_json(reports: &[ForcedChoiceReport]) -> serde_json::Value {
    let rows: Vec<_> = reports
        .iter()
        .map(|r| {
            let cats: serde_json::Map<String, serde_json::Value> = r
                .categories
                .iter()
                .map(|(c, t)| {
                    (
                        c.to_string(),
                        json!({ "successes": t.successes, "trials": t.trials, "accuracy": t.accuracy().map(rounded) }),
                    )
                })
                .collect();
            json!({ "metric": r.metric.to_string(), "categories": cats, "average": rounded(r.average()) })
        })
        .collect();
    json!({ "tie_policy": "failure", "metrics": rows })
}

/// One comparison of a correct caption against one distractor, both scored
/// against the image's other correct captions.
#[derive(Debug, Clone, PartialEq)]
pub struct DistractionTrial {
    pub image_id: String,
    pub correct_index: usize,
    pub distractor_index: usize,
    pub category: DistractorCategory,
    pub correct_score: f64,
    pub distractor_score: f64,
}

impl DistractionTrial {
    pub fn success(&self) -> bool {
        self.correct_score > self.distractor_score
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistractionReport {
    pub metric: MetricId,
    pub categories: BTreeMap<DistractorCategory, CategoryTally>,
    pub skipped_images: Vec<String>,
}

impl DistractionReport {
    pub fn accuracy(&self, category: DistractorCategory) -> Option<f64> {
        self.categories.get(&category).and_then(CategoryTally::accuracy)
    }

    /// All trials pooled across categories.
    pub fn overall(&self) -> CategoryTally {
        self.categories.values().fold(CategoryTally::default(), |acc, t| CategoryTally {
            successes: acc.successes + t.successes,
            trials: acc.trials + t.trials,
        })
    }
}

/// Scores every trial. For correct caption `i` of an image the references are
/// the image's other correct captions; external scores are looked up as
/// `<image_id>/c<i>` and `<image_id>/c<i>/d<j>` (0-based). Images with fewer
/// than two correct captions are skipped with a warning and returned by id.
pub fn distraction_trials(
    instances: &[DistractionInstance],
    scorer: &Scorer,
    metric: &MetricId,
    exec: Execution,
) -> Result<(Vec<DistractionTrial>, Vec<String>), HarnessError> {
    let mut skipped = Vec::new();
    let usable: Vec<&DistractionInstance> = instances
        .iter()
        .filter(|inst| {
            let ok = inst.correct_captions.len() >= 2;
            if !ok {
                log::warn!("image {} has fewer than 2 correct captions; skipped", inst.image_id);
                skipped.push(inst.image_id.clone());
            }
            ok
        })
        .collect();

    let per_image = exec.map(&usable, |inst| {
        let correct = tokenize_all(&inst.correct_captions);
        let distractors: Vec<TokenizedCaption> = inst.distractors.iter().map(|d| tokenize(&d.caption)).collect();
        let mut trials = Vec::new();
        for i in 0..correct.len() {
            let refs: Vec<TokenizedCaption> =
                correct.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, c)| c.clone()).collect();
            let score = |key: String, caption: &TokenizedCaption| {
                scorer.score(metric, &key, caption, &refs).map(|c| c.value).map_err(|message| HarnessError::Score {
                    id: key,
                    metric: metric.to_string(),
                    message,
                })
            };
            let base = format!("{}/c{i}", inst.image_id);
            let correct_score = score(base.clone(), &correct[i])?;
            for (j, d) in distractors.iter().enumerate() {
                trials.push(DistractionTrial {
                    image_id: inst.image_id.clone(),
                    correct_index: i,
                    distractor_index: j,
                    category: inst.distractors[j].category,
                    correct_score,
                    distractor_score: score(format!("{base}/d{j}"), d)?,
                });
            }
        }
        Ok::<_, HarnessError>(trials)
    });
    let mut trials = Vec::new();
    for t in per_image {
        trials.extend(t?);
    }
    Ok((trials, skipped))
}

/// Pools trials per category (and overall) across images.
pub fn distraction_from_trials(
    metric: MetricId,
    trials: &[DistractionTrial],
    skipped_images: Vec<String>,
) -> DistractionReport {
    let mut categories: BTreeMap<DistractorCategory, CategoryTally> = BTreeMap::new();
    for t in trials {
        categories.entry(t.category).or_default().record(t.success());
    }
    DistractionReport { metric, categories, skipped_images }
}

pub fn distraction_accuracy(
    instances: &[DistractionInstance],
    scorer: &Scorer,
    metric: &MetricId,
    exec: Execution,
) -> Result<DistractionReport, HarnessError> {
    let (trials, skipped) = distraction_trials(instances, scorer, metric, exec)?;
    Ok(distraction_from_trials(metric.clone(), &trials, skipped))
}

/// CIDEr corpus for distraction data: each image's correct captions.
pub fn distraction_corpus(instances: &[DistractionInstance]) -> Vec<Vec<TokenizedCaption>> {
    instances.iter().map(|d| tokenize_all(&d.correct_captions)).collect()
}

/// CSV: `metric,replace_scene,replace_person,share_scene,share_person,overall`
/// preceded by a comment line stating the pooling rule.
pub fn distraction_csv(reports: &[DistractionReport]) -> String {
    let mut out = String::from("# accuracy = successes / trials, pooled over all images; ties are failures\n");
    out.push_str("metric,replace_scene,replace_person,share_scene,share_person,overall\n");
    for r in reports {
        out.push_str(&csv_field(&r.metric.to_string()));
        for c in DistractorCategory::ALL {
            out.push(',');
            out.push_str(&r.accuracy(c).map(fmt_sig).unwrap_or_default());
        }
        out.push(',');
        out.push_str(&r.overall().accuracy().map(fmt_sig).unwrap_or_default());
        out.push('\n');
    }
    out
}

pub fn distraction_json(reports: &[DistractionReport]) -> serde_json::Value {
    let tally = |t: &CategoryTally| json!({ "successes": t.successes, "trials": t.trials, "accuracy": t.accuracy().map(rounded) });
    let rows: Vec<_> = reports
        .iter()
        .map(|r| {
            let cats: serde_json::Map<String, serde_json::Value> =
                r.categories.iter().map(|(c, t)| (c.to_string(), tally(t))).collect();
            json!({
                "metric": r.metric.to_string(),
                "categories": cats,
                "overall": tally(&r.overall()),
                "skipped_images": r.skipped_images,
            })
        })
        .collect();
    json!({ "pooling": "trial", "tie_policy": "failure", "metrics": rows })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::dataset::{parse_distraction, parse_triplets};
    use crate::harness::scoring::{Resources, ScoringConfig};

    fn triplets() -> Vec<TripletInstance> {
        let lines = [
            r#"{"instance_id": "1", "references": ["r"], "candidate_a": "a", "candidate_b": "b", "human_choice": "A", "category": "HC"}"#,
            r#"{"instance_id": "2", "references": ["r"], "candidate_a": "a", "candidate_b": "b", "human_choice": "B", "category": "HC"}"#,
            r#"{"instance_id": "3", "references": ["r"], "candidate_a": "a", "candidate_b": "b", "human_choice": "A", "category": "MM"}"#,
        ];
        parse_triplets(&lines.join("\n")).unwrap()
    }

    #[test]
    fn copying_the_human_is_perfect_and_constant_is_zero() {
        let t = triplets();
        let oracle: Vec<(f64, f64)> =
            t.iter().map(|x| if x.human_choice == Choice::A { (1.0, 0.0) } else { (0.0, 1.0) }).collect();
        let r = forced_choice_from_scores(MetricId::Bleu, &t, &oracle);
        assert_eq!(r.average(), 1.0);
        let r = forced_choice_from_scores(MetricId::Bleu, &t, &[(0.3, 0.3); 3]);
        assert_eq!(r.average(), 0.0);
        assert_eq!(r.accuracy(PairCategory::HI), None);
        let r = forced_choice_from_scores(MetricId::Bleu, &t, &[(0.9, 0.1); 3]);
        assert_eq!(r.accuracy(PairCategory::HC), Some(0.5));
        assert_eq!(r.accuracy(PairCategory::MM), Some(1.0));
        assert_eq!(r.average(), 0.75);
        assert_eq!(forced_choice_csv(&[r]), "metric,HC,HI,HM,MM,average\nbleu,0.500000,,,1.00000,0.750000\n");
    }

    #[test]
    fn distraction_with_bleu() {
        let data = parse_distraction(concat!(
            r#"{"image_id": "i1", "correct": ["a man rides a horse", "a man rides a horse"], "distractors": [{"caption": "zebra zebra", "category": "replace_scene"}, {"caption": "a man rides a horse", "category": "share_person"}]}"#,
            "\n",
            r#"{"image_id": "i2", "correct": ["only one"], "distractors": [{"caption": "x", "category": "share_scene"}]}"#
        ))
        .unwrap();
        let scorer = Scorer::new(ScoringConfig::with_metrics(vec![MetricId::Bleu]), Resources::default()).unwrap();
        let r = distraction_accuracy(&data, &scorer, &MetricId::Bleu, Execution::Sequential).unwrap();
        // Disjoint distractor: 1 > 0 twice. Identical distractor ties: failure twice.
        assert_eq!(r.categories[&DistractorCategory::ReplaceScene], CategoryTally { successes: 2, trials: 2 });
        assert_eq!(r.categories[&DistractorCategory::SharePerson], CategoryTally { successes: 0, trials: 2 });
        assert_eq!(r.overall(), CategoryTally { successes: 2, trials: 4 });
        assert_eq!(r.skipped_images, vec!["i2".to_string()]);
        let csv = distraction_csv(&[r]);
        assert!(csv.ends_with("bleu,1.00000,,,0.00000,0.500000\n"));
    }
}
