//! Metric-human correlation report with Williams significance matrices.

use std::collections::HashMap;

use serde_json::json;

use super::dataset::EvalInstance;
use super::scoring::{rounded, ScoreTable};
use super::{DataError, HarnessError};
use crate::metastats::{correlations, spearman, williams_test, CorrelationKind, CorrelationResult, ScoreVector};
use crate::metric::MetricId;
use crate::report::fmt_sig;

/// Williams p-values below this mark a significant win.
pub const WIN_THRESHOLD: f64 = 0.05;

/// Human judgments aligned with a score table.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgmentColumn {
    pub name: String,
    pub values: ScoreVector,
}

/// Builds the judgment column `spec` for `ids` (in that order). `a+b` takes
/// the per-instance mean of judgments `a` and `b`.
pub fn judgment_column(instances: &[EvalInstance], ids: &[String], spec: &str) -> Result<JudgmentColumn, HarnessError> {
    let parts: Vec<&str> = spec.split('+').map(str::trim).collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(HarnessError::Config(format!("invalid judgment name `{spec}`")));
    }
    let by_id: HashMap<&str, &EvalInstance> = instances.iter().map(|i| (i.instance_id.as_str(), i)).collect();
    let mut values = Vec::with_capacity(ids.len());
    for id in ids {
        let inst = by_id
            .get(id.as_str())
            .ok_or_else(|| DataError::Invalid(format!("instance `{id}` is not in the dataset")))?;
        let mut sum = 0.0;
        for part in &parts {
            sum += inst
                .judgments
                .get(*part)
                .ok_or_else(|| DataError::Invalid(format!("instance `{id}` has no judgment `{part}`")))?;
        }
        values.push(sum / parts.len() as f64);
    }
    Ok(JudgmentColumn { name: spec.to_string(), values: ScoreVector::new(ids.to_vec(), values)? })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricCorrelation {
    pub metric: MetricId,
    pub result: CorrelationResult,
}

/// Correlations of every retained metric with one judgment column (or the
/// mean over several columns, named `mean`).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationBlock {
    pub judgment: String,
    pub rows: Vec<MetricCorrelation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix {
    pub labels: Vec<MetricId>,
    pub values: Vec<Vec<f64>>,
}

/// Pairwise Williams tests. `p[i][j]` tests whether `order[i]` correlates with
/// the judgments more strongly than `order[j]`; the diagonal is empty, as are
/// pairs where the test is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct WilliamsMatrix {
    pub judgment: String,
    pub kind: CorrelationKind,
    pub order: Vec<MetricId>,
    pub p: Vec<Vec<Option<f64>>>,
}

impl WilliamsMatrix {
    pub fn win(&self, i: usize, j: usize) -> Option<bool> {
        self.p[i][j].map(|p| p < WIN_THRESHOLD)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub n: usize,
    pub kind: CorrelationKind,
    pub excluded: Vec<MetricId>,
    pub blocks: Vec<CorrelationBlock>,
    pub metric_spearman: MetricMatrix,
    pub williams: Vec<WilliamsMatrix>,
}

/// Correlates every metric column with each judgment column. Constant metric
/// columns are excluded with a warning. With several judgment columns a
/// `mean` block averages their coefficients. `kind` selects the coefficient
/// fed to the Williams test.
pub fn correlation_report(
    table: &ScoreTable,
    judgments: &[JudgmentColumn],
    kind: CorrelationKind,
) -> Result<CorrelationReport, HarnessError> {
    if judgments.is_empty() {
        return Err(HarnessError::Config("at least one judgment column is required".into()));
    }
    let mut columns = Vec::new();
    let mut excluded = Vec::new();
    for metric in &table.metrics {
        let col = table.column(metric).expect("metric from table");
        if col.values.windows(2).all(|w| w[0] == w[1]) {
            log::warn!("{metric} is constant over the dataset; excluded from correlations");
            excluded.push(metric.clone());
        } else {
            columns.push((metric.clone(), col));
        }
    }

    let mut blocks = Vec::new();
    let mut williams = Vec::new();
    for judgment in judgments {
        let mut rows = Vec::new();
        for (metric, col) in &columns {
            col.check_aligned(&judgment.values)?;
            let result = correlations(&col.values, &judgment.values.values)?;
            rows.push(MetricCorrelation { metric: metric.clone(), result });
        }
        williams.push(williams_matrix(&columns, judgment, kind)?);
        blocks.push(CorrelationBlock { judgment: judgment.name.clone(), rows });
    }
    if blocks.len() > 1 {
        let k = blocks.len() as f64;
        let rows = (0..columns.len())
            .map(|i| {
                let mean =
                    |f: fn(&CorrelationResult) -> f64| blocks.iter().map(|b| f(&b.rows[i].result)).sum::<f64>() / k;
                MetricCorrelation {
                    metric: columns[i].0.clone(),
                    result: CorrelationResult {
                        pearson: mean(|r| r.pearson),
                        spearman: mean(|r| r.spearman),
                        kendall: mean(|r| r.kendall),
                    },
                }
            })
            .collect();
        blocks.push(CorrelationBlock { judgment: "mean".into(), rows });
    }

    let labels: Vec<MetricId> = columns.iter().map(|(m, _)| m.clone()).collect();
    let mut values = vec![vec![1.0; columns.len()]; columns.len()];
    for i in 0..columns.len() {
        for j in i + 1..columns.len() {
            let r = spearman(&columns[i].1.values, &columns[j].1.values)?;
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationReport {
        n: table.len(),
        kind,
        excluded,
        blocks,
        metric_spearman: MetricMatrix { labels, values },
        williams,
    })
}

fn williams_matrix(
    columns: &[(MetricId, ScoreVector)],
    judgment: &JudgmentColumn,
    kind: CorrelationKind,
) -> Result<WilliamsMatrix, HarnessError> {
    let human = &judgment.values.values;
    let mut with_r = columns
        .iter()
        .map(|(m, c)| Ok((m.clone(), c, kind.compute(&c.values, human)?)))
        .collect::<Result<Vec<_>, HarnessError>>()?;
    // Descending human correlation; ties keep table order.
    with_r.sort_by(|a, b| b.2.total_cmp(&a.2));

    let n = human.len();
    let k = with_r.len();
    let mut p = vec![vec![None; k]; k];
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let (mi, ci, r13) = &with_r[i];
            let (mj, cj, r23) = &with_r[j];
            let r12 = match kind.compute(&ci.values, &cj.values) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("williams {mi} vs {mj}: {e}");
                    continue;
                }
            };
            match williams_test(*r13, *r23, r12, n) {
                Ok(w) => p[i][j] = Some(w.p),
                Err(e) => log::warn!("williams {mi} vs {mj}: {e}"),
            }
        }
    }
    Ok(WilliamsMatrix {
        judgment: judgment.name.clone(),
        kind,
        order: with_r.into_iter().map(|(m, _, _)| m).collect(),
        p,
    })
}

fn to_csv(records: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.write_record(&r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
}

impl CorrelationReport {
    /// `judgment,metric,pearson,spearman,kendall,n`.
    pub fn correlations_csv(&self) -> String {
        let mut records =
            vec![["judgment", "metric", "pearson", "spearman", "kendall", "n"].map(String::from).to_vec()];
        for block in &self.blocks {
            for row in &block.rows {
                records.push(vec![
                    block.judgment.clone(),
                    row.metric.to_string(),
                    fmt_sig(row.result.pearson),
                    fmt_sig(row.result.spearman),
                    fmt_sig(row.result.kendall),
                    self.n.to_string(),
                ]);
            }
        }
        to_csv(records)
    }

    /// Square Spearman matrix between metrics.
    pub fn metric_spearman_csv(&self) -> String {
        let m = &self.metric_spearman;
        let mut records =
            vec![std::iter::once("metric".to_string()).chain(m.labels.iter().map(ToString::to_string)).collect()];
        for (label, row) in m.labels.iter().zip(&m.values) {
            records.push(std::iter::once(label.to_string()).chain(row.iter().map(|v| fmt_sig(*v))).collect());
        }
        to_csv(records)
    }

    /// Williams p-values for judgment block `index`, ordered by descending
    /// human correlation.
    pub fn williams_csv(&self, index: usize) -> String {
        self.matrix_csv(index, |p| p.map(fmt_sig).unwrap_or_default())
    }

    /// `true` where the row metric significantly beats the column metric.
    pub fn wins_csv(&self, index: usize) -> String {
        self.matrix_csv(index, |p| p.map(|p| (p < WIN_THRESHOLD).to_string()).unwrap_or_default())
    }

    fn matrix_csv(&self, index: usize, cell: impl Fn(Option<f64>) -> String) -> String {
        let w = &self.williams[index];
        let mut records =
            vec![std::iter::once("metric".to_string()).chain(w.order.iter().map(ToString::to_string)).collect()];
        for (label, row) in w.order.iter().zip(&w.p) {
            records.push(std::iter::once(label.to_string()).chain(row.iter().map(|p| cell(*p))).collect());
        }
        to_csv(records)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let blocks: Vec<_> = self
            .blocks
            .iter()
            .map(|b| {
                json!({
                    "judgment": b.judgment,
                    "metrics": b.rows.iter().map(|r| json!({
                        "metric": r.metric.to_string(),
                        "pearson": rounded(r.result.pearson),
                        "spearman": rounded(r.result.spearman),
                        "kendall": rounded(r.result.kendall),
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        let williams: Vec<_> = self
            .williams
            .iter()
            .map(|w| {
                json!({
                    "judgment": w.judgment,
                    "correlation": w.kind,
                    "order": w.order.iter().map(ToString::to_string).collect::<Vec<_>>(),
                    "p": w.p.iter().map(|row| row.iter().map(|p| p.map_or(serde_json::Value::Null, rounded)).collect::<Vec<_>>()).collect::<Vec<_>>(),
                    "win": (0..w.order.len()).map(|i| (0..w.order.len()).map(|j| w.win(i, j)).collect::<Vec<_>>()).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "n": self.n,
            "excluded": self.excluded.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "correlations": blocks,
            "metric_spearman": {
                "labels": self.metric_spearman.labels.iter().map(ToString::to_string).collect::<Vec<_>>(),
                "values": self.metric_spearman.values.iter().map(|r| r.iter().map(|v| rounded(*v)).collect::<Vec<_>>()).collect::<Vec<_>>(),
            },
            "williams": williams,
            "win_threshold": WIN_THRESHOLD,
        })
    }
}
