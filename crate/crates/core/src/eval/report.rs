//! Named metrics, run evaluation and report rendering.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::abstention::{nauc_abstention, AbstentionItem};
use crate::eval::metrics::{ndcg_at_k, recall_at_k, MetricSummary, Qrels};
use crate::retrieval::RunRanking;

/// A retrieval metric name such as `ndcg@10`, `recall@100` or `nauc@10`.
///
/// `nauc@k` is computed over per-query NDCG@k; `nauc_recall@k` over Recall@k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricSpec {
    Ndcg(usize),
    Recall(usize),
    NaucNdcg(usize),
    NaucRecall(usize),
}

impl MetricSpec {
    pub const DEFAULT: [MetricSpec; 3] = [Self::Ndcg(10), Self::Recall(100), Self::NaucNdcg(10)];

    pub fn k(&self) -> usize {
        match *self {
            Self::Ndcg(k) | Self::Recall(k) | Self::NaucNdcg(k) | Self::NaucRecall(k) => k,
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(str::parse).collect()
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ndcg(k) => write!(f, "ndcg@{k}"),
            Self::Recall(k) => write!(f, "recall@{k}"),
            Self::NaucNdcg(k) => write!(f, "nauc@{k}"),
            Self::NaucRecall(k) => write!(f, "nauc_recall@{k}"),
        }
    }
}

impl FromStr for MetricSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("unknown metric `{s}`"));
        let (name, k) = s.trim().split_once('@').ok_or_else(bad)?;
        let k: usize = k.parse().map_err(|_| bad())?;
        if k == 0 {
            return Err(Error::InvalidConfig(format!("metric `{s}` needs k >= 1")));
        }
        match name.to_ascii_lowercase().as_str() {
            "ndcg" => Ok(Self::Ndcg(k)),
            "recall" => Ok(Self::Recall(k)),
            "nauc" | "nauc_ndcg" => Ok(Self::NaucNdcg(k)),
            "nauc_recall" => Ok(Self::NaucRecall(k)),
            _ => Err(bad()),
        }
    }
}

/// Metric name → value for one configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub label: String,
    pub metrics: BTreeMap<String, f64>,
    /// Run queries without usable judgments.
    #[serde(default)]
    pub skipped_queries: usize,
}

impl MetricReport {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            ..Self::default()
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }
}

fn nauc_from(summary: &MetricSummary, run: &RunRanking) -> Result<f64> {
    let items: Vec<AbstentionItem> = summary
        .per_query
        .iter()
        .map(|(q, m)| AbstentionItem::new(q.clone(), *m, run.confidence(q).unwrap_or(f64::NEG_INFINITY)))
        .collect();
    nauc_abstention(&items)
}

/// Evaluates a run, using each query's rank-1 score as its confidence.
pub fn evaluate_run(label: &str, run: &RunRanking, qrels: &Qrels, metrics: &[MetricSpec]) -> Result<MetricReport> {
    let mut report = MetricReport::new(label);
    for spec in metrics {
        let summary = match spec {
            MetricSpec::Ndcg(k) | MetricSpec::NaucNdcg(k) => ndcg_at_k(run, qrels, *k)?,
            MetricSpec::Recall(k) | MetricSpec::NaucRecall(k) => recall_at_k(run, qrels, *k)?,
        };
        report.skipped_queries = report.skipped_queries.max(summary.skipped);
        let value = match spec {
            MetricSpec::Ndcg(_) | MetricSpec::Recall(_) => summary.mean,
            MetricSpec::NaucNdcg(_) | MetricSpec::NaucRecall(_) => nauc_from(&summary, run)?,
        };
        report.insert(spec.to_string(), value);
    }
    Ok(report)
}

/// Fixed-width table with one row per report and one column per metric.
pub fn render_table(reports: &[MetricReport]) -> String {
    let mut columns: Vec<&str> = Vec::new();
    for r in reports {
        for name in r.metrics.keys() {
            if !columns.contains(&name.as_str()) {
                columns.push(name);
            }
        }
    }
    let label_width = reports.iter().map(|r| r.label.chars().count()).max().unwrap_or(0).max(6);
    let mut out = String::new();
    let _ = write!(out, "{:<label_width$}", "config");
    for c in &columns {
        let _ = write!(out, "  {c:>12}");
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{:<label_width$}", r.label);
        for c in &columns {
            match r.get(c) {
                Some(v) => {
                    let _ = write!(out, "  {v:>12.4}");
                }
                None => {
                    let _ = write!(out, "  {:>12}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}
