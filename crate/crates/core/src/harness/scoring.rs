//! Metric configuration, shared resources, and batch scoring into a table.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::dataset::EvalInstance;
use super::{DataError, HarnessError};
use crate::embeddings::EmbeddingTable;
use crate::exec::Execution;
use crate::metastats::ScoreVector;
use crate::meteor::{meteor, MeteorParams, SynonymLexicon};
use crate::metric::MetricId;
use crate::ngram::{bleu, build_idf, cider, rouge_l, IdfTable};
use crate::report::fmt_sig;
use crate::textprep::{tokenize, RawCaption, StopwordList, TokenizedCaption};
use crate::wmd::{wmd_similarity, WmdError, WmdParams};

/// Scores computed elsewhere (e.g. SPICE), keyed by instance id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExternalScores {
    scores: HashMap<String, f64>,
}

impl ExternalScores {
    /// Reads a CSV with header `instance_id,score`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(csv_error)?.clone();
        if headers.len() != 2 || &headers[0] != "instance_id" || &headers[1] != "score" {
            return Err(DataError::Line { line: 1, message: "expected header `instance_id,score`".into() });
        }
        let mut scores = HashMap::new();
        for (idx, record) in rdr.records().enumerate() {
            let line = idx + 2;
            let record = record.map_err(csv_error)?;
            let value: f64 = record[1]
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| DataError::Line { line, message: format!("invalid score `{}`", &record[1]) })?;
            if scores.insert(record[0].to_string(), value).is_some() {
                return Err(DataError::Line { line, message: format!("duplicate instance_id `{}`", &record[0]) });
            }
        }
        Ok(Self { scores })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| DataError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::read_csv(file)
    }

    pub fn from_map(scores: HashMap<String, f64>) -> Self {
        Self { scores }
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.scores.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

pub(crate) fn csv_error(e: csv::Error) -> DataError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    DataError::Line { line, message: e.to_string() }
}

/// Immutable inputs shared by every scored instance.
#[derive(Debug, Clone)]
pub struct Resources {
    pub idf: Option<IdfTable>,
    pub embeddings: Option<EmbeddingTable>,
    /// Hex SHA-256 of the embedding file, recorded in provenance.
    pub embeddings_sha256: Option<String>,
    pub stopwords: StopwordList,
    pub lexicon: Option<SynonymLexicon>,
    pub external: BTreeMap<String, ExternalScores>,
}

impl Default for Resources {
    fn default() -> Self {
        Self {
            idf: None,
            embeddings: None,
            embeddings_sha256: None,
            stopwords: StopwordList::english(),
            lexicon: None,
            external: BTreeMap::new(),
        }
    }
}

impl Resources {
    /// Builds the CIDEr document frequencies from `corpus` (one entry per
    /// image, holding that image's reference captions) unless a table is set.
    pub fn ensure_idf(&mut self, corpus: &[Vec<TokenizedCaption>]) -> Result<(), HarnessError> {
        if self.idf.is_none() {
            let table = build_idf(corpus).map_err(|e| HarnessError::Config(format!("cannot build idf table: {e}")))?;
            self.idf = Some(table);
        }
        Ok(())
    }
}

const SNAP_DIGITS: i32 = 12;

/// Rounds to `SNAP_DIGITS` significant digits.
fn snap(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let scale = 10f64.powi(SNAP_DIGITS - 1 - v.abs().log10().floor() as i32);
    if !scale.is_finite() {
        return v;
    }
    (v * scale).round() / scale
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub metrics: Vec<MetricId>,
    pub bleu_max_n: usize,
    pub rouge_beta: f64,
    pub meteor: MeteorParams,
    pub wmd: WmdParams,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            metrics: vec![MetricId::Bleu, MetricId::RougeL, MetricId::Cider, MetricId::Meteor, MetricId::Wmd],
            bleu_max_n: 4,
            rouge_beta: 1.2,
            meteor: MeteorParams::default(),
            wmd: WmdParams::default(),
        }
    }
}

impl ScoringConfig {
    pub fn with_metrics(metrics: Vec<MetricId>) -> Self {
        Self { metrics, ..Self::default() }
    }
}

/// One table cell. Degenerate cells (e.g. a candidate with no embedded
/// content words) hold 0 and are kept, not dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub value: f64,
    pub degenerate: bool,
}

/// Validated configuration plus resources; scores any metric it was built for.
#[derive(Debug, Clone)]
pub struct Scorer {
    config: ScoringConfig,
    resources: Resources,
}

impl Scorer {
    /// Checks parameters and that every requested metric has its resources.
    pub fn new(config: ScoringConfig, resources: Resources) -> Result<Self, HarnessError> {
        let config_err = |m: String| Err(HarnessError::Config(m));
        if config.metrics.is_empty() {
            return config_err("no metrics requested".into());
        }
        let mut seen = HashSet::new();
        for m in &config.metrics {
            if !seen.insert(m) {
                return config_err(format!("metric `{m}` requested twice"));
            }
            match m {
                MetricId::Cider if resources.idf.is_none() => {
                    return config_err("cider requires an idf table or a reference corpus".into())
                }
                MetricId::Wmd if resources.embeddings.is_none() => {
                    return config_err("wmd requires an embedding table (--embeddings)".into())
                }
                MetricId::External(name) if !resources.external.contains_key(name) => {
                    return config_err(format!("no score file supplied for `{m}`"))
                }
                MetricId::Combined(_) => {
                    return config_err(format!("`{m}` is built from a score table with `combine`, not scored directly"))
                }
                _ => {}
            }
        }
        if !(1..=4).contains(&config.bleu_max_n) {
            return config_err(format!("bleu max n must be in 1..=4, got {}", config.bleu_max_n));
        }
        if !(config.rouge_beta > 0.0 && config.rouge_beta.is_finite()) {
            return config_err(format!("rouge beta must be positive, got {}", config.rouge_beta));
        }
        if let Err(e) = config.meteor.validate() {
            return config_err(e.to_string());
        }
        if !(config.wmd.scale > 0.0 && config.wmd.scale.is_finite()) {
            return config_err(format!("wmd scale must be positive, got {}", config.wmd.scale));
        }
        Ok(Self { config, resources })
    }

    pub fn metrics(&self) -> &[MetricId] {
        &self.config.metrics
    }

    pub fn config(&self) -> &ScoringConfig {
        &self.config
    }

    pub fn resources(&self) -> &Resources {
        &self.resources
    }

    /// Scores one candidate. `key` identifies the scored item for external
    /// score lookup.
    ///
    /// Computed scores are snapped to 12 significant digits so that values
    /// equal in exact arithmetic but reached along different floating-point
    /// paths compare equal (ties matter to the protocols). External scores
    /// are passed through untouched.
    pub fn score(
        &self,
        metric: &MetricId,
        key: &str,
        candidate: &TokenizedCaption,
        references: &[TokenizedCaption],
    ) -> Result<Cell, String> {
        let cell = self.score_unsnapped(metric, key, candidate, references)?;
        if metric.is_external() {
            return Ok(cell);
        }
        Ok(Cell { value: snap(cell.value), ..cell })
    }

    fn score_unsnapped(
        &self,
        metric: &MetricId,
        key: &str,
        candidate: &TokenizedCaption,
        references: &[TokenizedCaption],
    ) -> Result<Cell, String> {
        let ok = |value: f64| Ok(Cell { value, degenerate: false });
        let res = &self.resources;
        match metric {
            MetricId::Bleu => ok(bleu(candidate, references, self.config.bleu_max_n).map_err(|e| e.to_string())?.value),
            MetricId::RougeL => {
                ok(rouge_l(candidate, references, self.config.rouge_beta).map_err(|e| e.to_string())?.value)
            }
            MetricId::Cider => {
                let idf = res.idf.as_ref().expect("checked in Scorer::new");
                ok(cider(candidate, references, idf).map_err(|e| e.to_string())?.value)
            }
            MetricId::Meteor => ok(meteor(candidate, references, res.lexicon.as_ref(), self.config.meteor)
                .map_err(|e| e.to_string())?
                .value),
            MetricId::Wmd => {
                let table = res.embeddings.as_ref().expect("checked in Scorer::new");
                match wmd_similarity(candidate, references, table, &res.stopwords, self.config.wmd) {
                    Ok(s) => {
                        if !s.dropped.is_empty() {
                            log::debug!("{key}: dropped out-of-vocabulary tokens {:?}", s.dropped);
                        }
                        Ok(Cell { value: s.score.value, degenerate: s.degenerate })
                    }
                    Err(WmdError::AllReferencesDegenerate) => {
                        log::warn!("{key}: every reference is empty for wmd; scoring 0");
                        Ok(Cell { value: 0.0, degenerate: true })
                    }
                    Err(e) => Err(e.to_string()),
                }
            }
            MetricId::External(name) => {
                let scores = &res.external[name];
                scores
                    .get(key)
                    .map(|value| Cell { value, degenerate: false })
                    .ok_or_else(|| format!("no external score for `{key}`"))
            }
            MetricId::Combined(_) => Err(format!("`{metric}` cannot be scored per instance")),
        }
    }

    /// Snapshot of the configuration and resource identities.
    pub fn provenance(&self) -> serde_json::Value {
        let res = &self.resources;
        let stop_list: Vec<&str> = res.stopwords.iter().collect();
        json!({
            "tool": concat!("capeval ", env!("CARGO_PKG_VERSION")),
            "tokenizer": "nfc-lowercase-ptb",
            "stemmer": "porter",
            "config": self.config,
            "stopwords": { "count": stop_list.len(), "sha256": sha256_hex(stop_list.join("\n").as_bytes()) },
            "embeddings": res.embeddings.as_ref().map(|t| json!({
                "sha256": res.embeddings_sha256,
                "vocabulary": t.len(),
                "dim": t.dim(),
            })),
            "idf": res.idf.as_ref().map(|t| json!({ "corpus_size": t.corpus_size(), "ngrams": t.len() })),
            "lexicon_entries": res.lexicon.as_ref().map(SynonymLexicon::len),
            "external": res.external.iter().map(|(k, v)| (k.clone(), v.len())).collect::<BTreeMap<_, _>>(),
        })
    }
}

pub(crate) fn tokenize_all(captions: &[RawCaption]) -> Vec<TokenizedCaption> {
    captions.iter().map(tokenize).collect()
}

/// Per-image reference corpus of a judged dataset, for building CIDEr idf.
/// Instances sharing an image id contribute the union of their references.
pub fn reference_corpus(instances: &[EvalInstance]) -> Vec<Vec<TokenizedCaption>> {
    let mut by_image: BTreeMap<&str, Vec<&RawCaption>> = BTreeMap::new();
    for inst in instances {
        let refs = by_image.entry(&inst.image_id).or_default();
        for r in &inst.references {
            if !refs.contains(&r) {
                refs.push(r);
            }
        }
    }
    by_image.into_values().map(|refs| refs.into_iter().map(tokenize).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub instance_id: String,
    pub cells: Vec<Cell>,
}

/// Scores of every instance under every requested metric, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub metrics: Vec<MetricId>,
    pub rows: Vec<ScoreRow>,
    pub provenance: serde_json::Value,
}

/// Scores each instance's candidate against its references.
pub fn score_dataset(instances: &[EvalInstance], scorer: &Scorer, exec: Execution) -> Result<ScoreTable, HarnessError> {
    let results = exec.map(instances, |inst| {
        let candidate = tokenize(&inst.candidate);
        let references = tokenize_all(&inst.references);
        scorer
            .metrics()
            .iter()
            .map(|m| {
                scorer.score(m, &inst.instance_id, &candidate, &references).map_err(|message| HarnessError::Score {
                    id: inst.instance_id.clone(),
                    metric: m.to_string(),
                    message,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    });
    let rows = instances
        .iter()
        .zip(results)
        .map(|(inst, cells)| Ok(ScoreRow { instance_id: inst.instance_id.clone(), cells: cells? }))
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(ScoreTable { metrics: scorer.metrics().to_vec(), rows, provenance: scorer.provenance() })
}

impl ScoreTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.instance_id.clone()).collect()
    }

    pub fn metric_index(&self, metric: &MetricId) -> Option<usize> {
        self.metrics.iter().position(|m| m == metric)
    }

    pub fn column(&self, metric: &MetricId) -> Option<ScoreVector> {
        let k = self.metric_index(metric)?;
        Some(ScoreVector { ids: self.ids(), values: self.rows.iter().map(|r| r.cells[k].value).collect() })
    }

    /// Appends (or replaces) a metric column aligned with the table rows.
    pub fn set_column(&mut self, metric: MetricId, values: &ScoreVector) -> Result<(), HarnessError> {
        let own = ScoreVector { ids: self.ids(), values: vec![0.0; self.len()] };
        own.check_aligned(values)?;
        let k = match self.metric_index(&metric) {
            Some(k) => k,
            None => {
                self.metrics.push(metric);
                self.rows.iter_mut().for_each(|r| r.cells.push(Cell { value: 0.0, degenerate: false }));
                self.metrics.len() - 1
            }
        };
        for (row, &v) in self.rows.iter_mut().zip(&values.values) {
            row.cells[k] = Cell { value: v, degenerate: false };
        }
        Ok(())
    }

    /// CSV: `instance_id,<metric>...,degenerate` where `degenerate` lists the
    /// flagged metrics separated by `;`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["instance_id".to_string()];
        header.extend(self.metrics.iter().map(ToString::to_string));
        header.push("degenerate".into());
        w.write_record(&header).map_err(io_error)?;
        for row in &self.rows {
            let mut record = vec![row.instance_id.clone()];
            record.extend(row.cells.iter().map(|c| fmt_sig(c.value)));
            let flagged: Vec<String> =
                self.metrics.iter().zip(&row.cells).filter(|(_, c)| c.degenerate).map(|(m, _)| m.to_string()).collect();
            record.push(flagged.join(";"));
            w.write_record(&record).map_err(io_error)?;
        }
        w.flush().map_err(|e| HarnessError::Io(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, HarnessError> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers().map_err(csv_error)?.clone();
        let names: Vec<&str> = headers.iter().collect();
        if names.first() != Some(&"instance_id") {
            return Err(DataError::Line { line: 1, message: "first column must be `instance_id`".into() }.into());
        }
        let has_flags = names.last() == Some(&"degenerate");
        let metric_names = &names[1..names.len() - usize::from(has_flags)];
        let metrics = metric_names
            .iter()
            .map(|n| n.parse::<MetricId>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| DataError::Line { line: 1, message: e.to_string() })?;

        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        for (idx, record) in rdr.records().enumerate() {
            let line = idx + 2;
            let record = record.map_err(csv_error)?;
            let id = record[0].to_string();
            if !seen.insert(id.clone()) {
                return Err(DataError::Line { line, message: format!("duplicate instance_id `{id}`") }.into());
            }
            let flagged: HashSet<&str> = if has_flags {
                record[names.len() - 1].split(';').filter(|s| !s.is_empty()).collect()
            } else {
                HashSet::new()
            };
            let cells =
                metric_names
                    .iter()
                    .enumerate()
                    .map(|(k, name)| {
                        let raw = &record[k + 1];
                        let value: f64 = raw.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                            DataError::Line { line, message: format!("invalid {name} score `{raw}`") }
                        })?;
                        Ok(Cell { value, degenerate: flagged.contains(metrics[k].to_string().as_str()) })
                    })
                    .collect::<Result<Vec<_>, DataError>>()?;
            rows.push(ScoreRow { instance_id: id, cells });
        }
        Ok(Self { metrics, rows, provenance: serde_json::Value::Null })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let scores: serde_json::Map<String, serde_json::Value> =
                    self.metrics.iter().zip(&row.cells).map(|(m, c)| (m.to_string(), rounded(c.value))).collect();
                let degenerate: Vec<String> = self
                    .metrics
                    .iter()
                    .zip(&row.cells)
                    .filter(|(_, c)| c.degenerate)
                    .map(|(m, _)| m.to_string())
                    .collect();
                json!({ "instance_id": row.instance_id, "scores": scores, "degenerate": degenerate })
            })
            .collect();
        json!({
            "metrics": self.metrics.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "provenance": self.provenance,
            "rows": rows,
        })
    }
}

/// JSON number carrying the same 6 significant digits as the CSV output.
pub(crate) fn rounded(v: f64) -> serde_json::Value {
    fmt_sig(v).parse::<f64>().ok().and_then(serde_json::Number::from_f64).map_or(serde_json::Value::Null, Into::into)
}

fn io_error(e: csv::Error) -> HarnessError {
    HarnessError::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::dataset::parse_judged;

    fn table() -> EmbeddingTable {
        EmbeddingTable::from_pairs(2, [("dog", vec![1.0, 0.0]), ("runs", vec![0.0, 1.0])]).unwrap()
    }

    #[test]
    fn snap_merges_one_ulp_splits() {
        let (a, b) = (1.3888888888888887e-1, 1.388888888888889e-1);
        assert_ne!(a, b);
        assert_eq!(snap(a), snap(b));
        for v in [0.0, 1.0, 10.0, 0.5, -0.25, 1e-300] {
            assert_eq!(snap(v), v);
        }
        assert!(snap(f64::NAN).is_nan());
    }

    #[test]
    fn one_instance_one_metric() {
        let data = parse_judged(
            r#"{"instance_id": "x", "image_id": "i", "candidate": "a dog runs", "references": ["a dog runs"]}"#,
        )
        .unwrap();
        let scorer = Scorer::new(ScoringConfig::with_metrics(vec![MetricId::Bleu]), Resources::default()).unwrap();
        let t = score_dataset(&data, &scorer, Execution::Sequential).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.rows[0].cells, vec![Cell { value: 1.0, degenerate: false }]);
    }

    #[test]
    fn missing_resources_are_config_errors() {
        let err = Scorer::new(ScoringConfig::with_metrics(vec![MetricId::Wmd]), Resources::default()).unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)));
        let err = Scorer::new(ScoringConfig::with_metrics(vec![MetricId::Cider]), Resources::default()).unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)));
        let spice = MetricId::External("spice".into());
        assert!(matches!(
            Scorer::new(ScoringConfig::with_metrics(vec![spice]), Resources::default()),
            Err(HarnessError::Config(_))
        ));
        let twice = ScoringConfig::with_metrics(vec![MetricId::Bleu, MetricId::Bleu]);
        assert!(matches!(Scorer::new(twice, Resources::default()), Err(HarnessError::Config(_))));
    }

    #[test]
    fn degenerate_wmd_is_flagged_not_dropped() {
        let data = parse_judged(concat!(
            r#"{"instance_id": "1", "image_id": "i", "candidate": "the a", "references": ["a dog runs"]}"#,
            "\n",
            r#"{"instance_id": "2", "image_id": "i", "candidate": "dog", "references": ["the"]}"#
        ))
        .unwrap();
        let resources = Resources { embeddings: Some(table()), ..Resources::default() };
        let scorer = Scorer::new(ScoringConfig::with_metrics(vec![MetricId::Wmd]), resources).unwrap();
        let t = score_dataset(&data, &scorer, Execution::Sequential).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows.iter().all(|r| r.cells[0] == Cell { value: 0.0, degenerate: true }));
        let mut csv = Vec::new();
        t.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "instance_id,wmd,degenerate\n1,0.00000,wmd\n2,0.00000,wmd\n");
    }

    #[test]
    fn external_scores_join_by_id() {
        let ext = ExternalScores::read_csv("instance_id,score\nx,0.25\n".as_bytes()).unwrap();
        let mut resources = Resources::default();
        resources.external.insert("spice".into(), ext);
        let spice = MetricId::External("spice".into());
        let scorer = Scorer::new(ScoringConfig::with_metrics(vec![spice.clone()]), resources).unwrap();
        let c = TokenizedCaption::from_words("a");
        assert_eq!(scorer.score(&spice, "x", &c, std::slice::from_ref(&c)).unwrap().value, 0.25);
        assert!(scorer.score(&spice, "y", &c, std::slice::from_ref(&c)).is_err());

        assert!(ExternalScores::read_csv("id,score\nx,1\n".as_bytes()).is_err());
        assert!(matches!(
            ExternalScores::read_csv("instance_id,score\nx,1\nx,2\n".as_bytes()),
            Err(DataError::Line { line: 3, .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let t = ScoreTable {
            metrics: vec![MetricId::Bleu, MetricId::Wmd],
            rows: vec![
                ScoreRow {
                    instance_id: "a,1".into(),
                    cells: vec![Cell { value: 0.5, degenerate: false }, Cell { value: 0.0, degenerate: true }],
                },
                ScoreRow {
                    instance_id: "b".into(),
                    cells: vec![Cell { value: 0.125, degenerate: false }, Cell { value: 0.75, degenerate: false }],
                },
            ],
            provenance: serde_json::Value::Null,
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = ScoreTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
