//! JSONL dataset loaders for judged, forced-choice and distraction data.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::textprep::RawCaption;

/// A candidate caption with its references and optional human judgments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalInstance {
    pub instance_id: String,
    pub image_id: String,
    pub candidate: RawCaption,
    pub references: Vec<RawCaption>,
    #[serde(default)]
    pub judgments: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

/// Forced-choice pair categories: human-correct/human-correct,
/// human/human-incorrect, human/machine, machine/machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PairCategory {
    HC,
    HI,
    HM,
    MM,
}

impl PairCategory {
    pub const ALL: [PairCategory; 4] = [PairCategory::HC, PairCategory::HI, PairCategory::HM, PairCategory::MM];
}

impl fmt::Display for PairCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletInstance {
    pub instance_id: String,
    pub references: Vec<RawCaption>,
    pub candidate_a: RawCaption,
    pub candidate_b: RawCaption,
    pub human_choice: Choice,
    pub category: PairCategory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistractorCategory {
    ReplaceScene,
    ReplacePerson,
    ShareScene,
    SharePerson,
}

impl DistractorCategory {
    pub const ALL: [DistractorCategory; 4] = [
        DistractorCategory::ReplaceScene,
        DistractorCategory::ReplacePerson,
        DistractorCategory::ShareScene,
        DistractorCategory::SharePerson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistractorCategory::ReplaceScene => "replace_scene",
            DistractorCategory::ReplacePerson => "replace_person",
            DistractorCategory::ShareScene => "share_scene",
            DistractorCategory::SharePerson => "share_person",
        }
    }
}

impl fmt::Display for DistractorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistractorCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown distractor category `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distractor {
    pub caption: RawCaption,
    pub category: DistractorCategory,
}

/// One image with its correct captions and constructed distractors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistractionInstance {
    pub image_id: String,
    #[serde(rename = "correct")]
    pub correct_captions: Vec<RawCaption>,
    pub distractors: Vec<Distractor>,
}

pub fn load_judged_dataset(path: impl AsRef<Path>) -> Result<Vec<EvalInstance>, DataError> {
    parse_judged(&read(path.as_ref())?)
}

pub fn load_triplets(path: impl AsRef<Path>) -> Result<Vec<TripletInstance>, DataError> {
    parse_triplets(&read(path.as_ref())?)
}

pub fn load_distraction(path: impl AsRef<Path>) -> Result<Vec<DistractionInstance>, DataError> {
    parse_distraction(&read(path.as_ref())?)
}

pub fn parse_judged(text: &str) -> Result<Vec<EvalInstance>, DataError> {
    let mut seen = HashSet::new();
    parse_lines(text, |inst: &EvalInstance| {
        if inst.references.is_empty() {
            return Err("`references` must contain at least one caption".into());
        }
        if let Some((name, _)) = inst.judgments.iter().find(|(_, v)| !v.is_finite()) {
            return Err(format!("judgment `{name}` is not finite"));
        }
        unique(&mut seen, &inst.instance_id)
    })
}

pub fn parse_triplets(text: &str) -> Result<Vec<TripletInstance>, DataError> {
    let mut seen = HashSet::new();
    parse_lines(text, |t: &TripletInstance| {
        if t.references.is_empty() {
            return Err("`references` must contain at least one caption".into());
        }
        if t.candidate_a == t.candidate_b {
            return Err("`candidate_a` and `candidate_b` are identical".into());
        }
        unique(&mut seen, &t.instance_id)
    })
}

/// Images with fewer than two correct captions are kept here; the
/// distraction protocol skips them with a warning.
pub fn parse_distraction(text: &str) -> Result<Vec<DistractionInstance>, DataError> {
    let mut seen = HashSet::new();
    parse_lines(text, |d: &DistractionInstance| {
        if d.correct_captions.is_empty() {
            return Err("`correct` must contain at least one caption".into());
        }
        if d.distractors.is_empty() {
            return Err("`distractors` must contain at least one entry".into());
        }
        unique(&mut seen, &d.image_id)
    })
}

fn read(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path)
        .map_err(|e| DataError::Io { path: path.display().to_string(), message: e.to_string() })
}

fn unique(seen: &mut HashSet<String>, id: &str) -> Result<(), String> {
    if seen.insert(id.to_string()) {
        Ok(())
    } else {
        Err(format!("duplicate id `{id}`"))
    }
}

/// Parses one JSON object per non-blank line, applying `check` to each.
fn parse_lines<T, F>(text: &str, mut check: F) -> Result<Vec<T>, DataError>
where
    T: DeserializeOwned,
    F: FnMut(&T) -> Result<(), String>,
{
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let item: T = serde_json::from_str(raw).map_err(|e| DataError::Line { line, message: e.to_string() })?;
        check(&item).map_err(|message| DataError::Line { line, message })?;
        out.push(item);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn judged_fixture() {
        let text = concat!(
            r#"{"instance_id": "1", "image_id": "img1", "candidate": "a dog runs", "references": ["a dog is running"], "judgments": {"expert": 3.0}}"#,
            "\n\n",
            r#"{"instance_id": "2", "image_id": "img1", "candidate": "a cat", "references": ["a dog", "one dog"]}"#,
            "\n"
        );
        let data = parse_judged(text).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data[0].judgments["expert"], 3.0);
        assert!(data[1].judgments.is_empty());
        assert_eq!(data[1].references.len(), 2);
    }

    #[test]
    fn judged_errors_carry_line_numbers() {
        let empty_refs = r#"{"instance_id": "1", "image_id": "i", "candidate": "x", "references": []}"#;
        assert!(matches!(parse_judged(empty_refs), Err(DataError::Line { line: 1, .. })));

        let line = r#"{"instance_id": "7", "image_id": "i", "candidate": "x", "references": ["y"]}"#;
        let dup = format!("{line}\n{line}\n");
        match parse_judged(&dup) {
            Err(DataError::Line { line: 2, message }) => assert!(message.contains("`7`")),
            other => panic!("{other:?}"),
        }

        let missing = format!("{line}\n{{\"instance_id\": \"8\", \"candidate\": \"x\", \"references\": [\"y\"]}}\n");
        match parse_judged(&missing) {
            Err(DataError::Line { line: 2, message }) => assert!(message.contains("image_id")),
            other => panic!("{other:?}"),
        }

        let blank = r#"{"instance_id": "1", "image_id": "i", "candidate": "   ", "references": ["y"]}"#;
        assert!(matches!(parse_judged(blank), Err(DataError::Line { line: 1, .. })));
    }

    #[test]
    fn triplets_and_distraction() {
        let t = r#"{"instance_id": "t1", "references": ["a man"], "candidate_a": "a man", "candidate_b": "a dog", "human_choice": "A", "category": "HM"}"#;
        let parsed = parse_triplets(t).unwrap();
        assert_eq!(parsed[0].human_choice, Choice::A);
        assert_eq!(parsed[0].category, PairCategory::HM);

        let same = r#"{"instance_id": "t1", "references": ["a man"], "candidate_a": "x", "candidate_b": "x", "human_choice": "A", "category": "HM"}"#;
        assert!(parse_triplets(same).is_err());

        let d = r#"{"image_id": "i1", "correct": ["a man rides", "a person rides"], "distractors": [{"caption": "a man swims", "category": "replace_scene"}]}"#;
        let parsed = parse_distraction(d).unwrap();
        assert_eq!(parsed[0].distractors[0].category, DistractorCategory::ReplaceScene);

        let bad = r#"{"image_id": "i1", "correct": ["a"], "distractors": [{"caption": "b", "category": "elsewhere"}]}"#;
        assert!(matches!(parse_distraction(bad), Err(DataError::Line { line: 1, .. })));
    }
}
