//! NDCG@k and Recall@k over a run and relevance judgments.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::retrieval::{Hit, RunRanking};

/// Relevance judgments: query id → doc id → grade.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `false` if the (query, doc) pair was already judged; the
    /// existing grade is kept.
    pub fn insert(&mut self, query_id: impl Into<String>, doc_id: impl Into<String>, grade: u32) -> bool {
        let docs = self.judgments.entry(query_id.into()).or_default();
        let doc_id = doc_id.into();
        if docs.contains_key(&doc_id) {
            return false;
        }
        docs.insert(doc_id, grade);
        true
    }

    pub fn get(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(query_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeMap<String, u32>)> {
        self.judgments.iter().map(|(q, d)| (q.as_str(), d))
    }

    /// Number of judged queries.
    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }
}

/// Mean of a per-query metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub per_query: Vec<(String, f64)>,
    /// Run queries that had no usable judgments.
    pub skipped: usize,
}

impl MetricSummary {
    fn from_per_query(per_query: Vec<(String, f64)>, skipped: usize) -> Self {
        let mean = if per_query.is_empty() {
            0.0
        } else {
            per_query.iter().map(|(_, v)| v).sum::<f64>() / per_query.len() as f64
        };
        Self {
            mean,
            per_query,
            skipped,
        }
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    Ok(())
}

fn gain(grade: u32) -> f64 {
    2f64.powi(grade as i32) - 1.0
}

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// NDCG@k of one ranked list; `None` when the query has no positive grade.
pub fn ndcg_for_query(hits: &[Hit], judged: &BTreeMap<String, u32>, k: usize) -> Option<f64> {
    let mut ideal: Vec<u32> = judged.values().copied().filter(|g| *g > 0).collect();
    if ideal.is_empty() {
        return None;
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal.iter().take(k).enumerate().map(|(i, g)| gain(*g) * discount(i + 1)).sum();
    let dcg: f64 = hits
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, h)| judged.get(&h.doc_id).map_or(0.0, |g| gain(*g) * discount(i + 1)))
        .sum();
    Some(dcg / idcg)
}

/// `|relevant ∩ top-k| / |relevant|`; `None` when nothing is relevant.
pub fn recall_for_query(hits: &[Hit], judged: &BTreeMap<String, u32>, k: usize) -> Option<f64> {
    let relevant = judged.values().filter(|g| **g > 0).count();
    if relevant == 0 {
        return None;
    }
    let found = hits
        .iter()
        .take(k)
        .filter(|h| judged.get(&h.doc_id).is_some_and(|g| *g > 0))
        .count();
    Some(found as f64 / relevant as f64)
}

fn per_query_metric(
    run: &RunRanking,
    qrels: &Qrels,
    k: usize,
    f: impl Fn(&[Hit], &BTreeMap<String, u32>, usize) -> Option<f64>,
) -> Result<MetricSummary> {
    check_k(k)?;
    let mut per_query = Vec::with_capacity(run.len());
    let mut skipped = 0;
    for (qid, hits) in run.iter() {
        match qrels.get(qid).and_then(|j| f(hits, j, k)) {
            Some(v) => per_query.push((qid.to_owned(), v)),
            None => skipped += 1,
        }
    }
    Ok(MetricSummary::from_per_query(per_query, skipped))
}

/// Mean NDCG@k with gain `2^grade − 1` and discount `1/log₂(rank+1)`.
///
/// Run queries absent from the qrels, or without any positive judgment, are
/// skipped and counted.
pub fn ndcg_at_k(run: &RunRanking, qrels: &Qrels, k: usize) -> Result<MetricSummary> {
    per_query_metric(run, qrels, k, ndcg_for_query)
}

/// Mean proportional recall at k.
pub fn recall_at_k(run: &RunRanking, qrels: &Qrels, k: usize) -> Result<MetricSummary> {
    per_query_metric(run, qrels, k, recall_for_query)
}
