//! Exact brute-force top-k search over Gaussian embeddings.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::similarity::{QueryKernel, SimilarityConfig};
use crate::types::{check_dim, EmbeddingStore, GaussianEmbedding};

/// Read-only scoring index. Means and variances are stored row-major;
/// variances are kept in single precision, the width of the on-disk format.
#[derive(Debug, Clone)]
pub struct Index {
    ids: Vec<String>,
    dim: usize,
    means: Vec<f64>,
    vars: Vec<f32>,
    sim_cfg: SimilarityConfig,
}

pub fn build_index(store: &EmbeddingStore, sim_cfg: SimilarityConfig) -> Result<Index> {
    Index::build(store, sim_cfg)
}

impl Index {
    pub fn build(store: &EmbeddingStore, sim_cfg: SimilarityConfig) -> Result<Self> {
        sim_cfg.validate()?;
        if store.is_empty() {
            return Err(Error::EmptyInput("cannot index an empty store"));
        }
        let dim = store.dim();
        let mut ids = Vec::with_capacity(store.len());
        let mut means = Vec::with_capacity(store.len() * dim);
        let mut vars = Vec::with_capacity(store.len() * dim);
        for r in store.records() {
            check_dim(dim, r.embedding.dim())?;
            let e = if sim_cfg.normalize_inputs {
                r.embedding.l2_normalize()?
            } else {
                r.embedding.clone()
            };
            ids.push(r.id.clone());
            means.extend_from_slice(e.mean());
            for v in e.var() {
                let narrow = *v as f32;
                if !narrow.is_finite() {
                    return Err(Error::InvalidEmbedding(format!("record `{}` has variance {v} beyond single precision", r.id)));
                }
                vars.push(narrow);
            }
        }
        Ok(Self {
            ids,
            dim,
            means,
            vars,
            sim_cfg,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn similarity(&self) -> &SimilarityConfig {
        &self.sim_cfg
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Stored (possibly normalized) mean of document `i`.
    pub fn mean(&self, i: usize) -> &[f64] {
        &self.means[i * self.dim..(i + 1) * self.dim]
    }

    pub fn var(&self, i: usize) -> &[f32] {
        &self.vars[i * self.dim..(i + 1) * self.dim]
    }

    fn kernel(&self, query: &GaussianEmbedding) -> Result<QueryKernel> {
        check_dim(self.dim, query.dim())?;
        let q = if self.sim_cfg.normalize_inputs {
            query.l2_normalize()?
        } else {
            query.clone()
        };
        Ok(QueryKernel::new(&q, self.sim_cfg))
    }

    /// Scores every document in index order.
    pub fn score_all(&self, query: &GaussianEmbedding) -> Result<Vec<f64>> {
        let kernel = self.kernel(query)?;
        Ok(self
            .means
            .chunks_exact(self.dim)
            .zip(self.vars.chunks_exact(self.dim))
            .map(|(m, v)| kernel.score(m, v))
            .collect())
    }

    /// Exact top-k, sorted by score descending, ties by ascending doc id.
    pub fn search_topk(&self, query_id: &str, query: &GaussianEmbedding, k: usize) -> Result<QueryResult> {
        if k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        let scores = self.score_all(query)?;
        let mut order: Vec<usize> = (0..scores.len()).collect();
        let cmp = |a: &usize, b: &usize| rank_order(scores[*a], &self.ids[*a], scores[*b], &self.ids[*b]);
        let k = k.min(order.len());
        if k < order.len() {
            order.select_nth_unstable_by(k - 1, cmp);
            order.truncate(k);
        }
        order.sort_by(cmp);
        let hits: Vec<Hit> = order
            .into_iter()
            .map(|i| Hit {
                doc_id: self.ids[i].clone(),
                score: scores[i],
            })
            .collect();
        Ok(QueryResult::new(query_id, hits))
    }

    /// Searches every record of `queries`, preserving store order.
    pub fn search_batch(&self, queries: &EmbeddingStore, k: usize) -> Result<Vec<QueryResult>> {
        queries
            .records()
            .par_iter()
            .map(|r| self.search_topk(&r.id, &r.embedding, k))
            .collect()
    }
}

/// Score descending, then doc id ascending.
fn rank_order(sa: f64, ida: &str, sb: f64, idb: &str) -> Ordering {
    sb.total_cmp(&sa).then_with(|| ida.cmp(idb))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub doc_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub query_id: String,
    pub hits: Vec<Hit>,
    /// Rank-1 score.
    pub confidence: f64,
}

impl QueryResult {
    pub fn new(query_id: impl Into<String>, hits: Vec<Hit>) -> Self {
        let confidence = hits.first().map_or(f64::NEG_INFINITY, |h| h.score);
        Self {
            query_id: query_id.into(),
            hits,
            confidence,
        }
    }
}

/// Ranked hits per query, as consumed by the evaluation metrics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRanking {
    queries: BTreeMap<String, Vec<Hit>>,
}

impl RunRanking {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a query's hits; they must already be in rank order.
    pub fn insert(&mut self, query_id: impl Into<String>, hits: Vec<Hit>) {
        self.queries.insert(query_id.into(), hits);
    }

    pub fn from_results(results: &[QueryResult]) -> Self {
        let mut run = Self::new();
        for r in results {
            run.insert(r.query_id.clone(), r.hits.clone());
        }
        run
    }

    pub fn get(&self, query_id: &str) -> Option<&[Hit]> {
        self.queries.get(query_id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Hit])> {
        self.queries.iter().map(|(q, h)| (q.as_str(), h.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Rank-1 score of a query, used as its abstention confidence.
    pub fn confidence(&self, query_id: &str) -> Option<f64> {
        self.queries.get(query_id).and_then(|h| h.first()).map(|h| h.score)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::score_pair;
    use crate::types::EmbeddingRecord;
    use proptest::prelude::*;

    fn ge(mean: &[f64], var: &[f64]) -> GaussianEmbedding {
        GaussianEmbedding::new(mean.to_vec(), var.to_vec()).unwrap()
    }

    fn store(recs: Vec<(&str, GaussianEmbedding)>) -> EmbeddingStore {
        let dim = recs[0].1.dim();
        EmbeddingStore::from_records("m", dim, recs.into_iter().map(|(i, e)| EmbeddingRecord::new(i, e))).unwrap()
    }

    #[test]
    fn single_record_index() {
        let q = ge(&[0.3, 0.4], &[0.0, 0.0]);
        let idx = build_index(&store(vec![("d", q.clone())]), SimilarityConfig::default()).unwrap();
        assert_eq!(idx.len(), 1);
        let r = idx.search_topk("q", &q, 10).unwrap();
        assert_eq!(r.hits.len(), 1);
        assert_eq!(r.hits[0].doc_id, "d");
        assert!((r.hits[0].score - 1.0).abs() < 1e-15);
        assert_eq!(r.confidence, r.hits[0].score);
    }

    #[test]
    fn oversized_variance_rejected() {
        let s = store(vec![("a", ge(&[1.0, 0.0], &[1e300, 0.0]))]);
        let cfg = SimilarityConfig { normalize_inputs: false, ..SimilarityConfig::default() };
        assert!(matches!(build_index(&s, cfg), Err(Error::InvalidEmbedding(_))));
    }

    #[test]
    fn empty_store_rejected() {
        let s = EmbeddingStore::new("m", 2).unwrap();
        assert!(matches!(build_index(&s, SimilarityConfig::default()), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn prenormalized_means_have_unit_norm() {
        let s = store(vec![("a", ge(&[3.0, 4.0], &[1.0, 1.0])), ("b", ge(&[-0.1, 0.02], &[0.0, 2.0]))]);
        let idx = build_index(&s, SimilarityConfig::default()).unwrap();
        for i in 0..idx.len() {
            let n: f64 = idx.mean(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn ties_broken_by_doc_id() {
        let e = ge(&[1.0, 1.0], &[0.1, 0.1]);
        let s = store(vec![("z", e.clone()), ("a", e.clone()), ("m", e.clone())]);
        let idx = build_index(&s, SimilarityConfig::default()).unwrap();
        let r = idx.search_topk("q", &e, 3).unwrap();
        let ids: Vec<&str> = r.hits.iter().map(|h| h.doc_id.as_str()).collect();
        assert_eq!(ids, ["a", "m", "z"]);
        let r = idx.search_topk("q", &e, 2).unwrap();
        assert_eq!(r.hits.len(), 2);
        assert_eq!(r.hits[1].doc_id, "m");
    }

    #[test]
    fn three_doc_ranking() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = store(vec![
            ("doc1", ge(&[1.0, 0.0], &[0.0, 0.0])),
            ("doc2", ge(&[0.0, 1.0], &[0.0, 0.0])),
            ("doc3", ge(&[h, h], &[0.0, 0.0])),
        ]);
        let idx = build_index(&s, SimilarityConfig::default()).unwrap();
        let r = idx.search_topk("q", &ge(&[1.0, 0.0], &[0.0, 0.0]), 3).unwrap();
        let got: Vec<(&str, f64)> = r.hits.iter().map(|h| (h.doc_id.as_str(), h.score)).collect();
        assert_eq!(got[0].0, "doc1");
        assert!((got[0].1 - 1.0).abs() < 1e-12);
        assert_eq!(got[1].0, "doc3");
        assert!((got[1].1 - h).abs() < 1e-12);
        assert_eq!(got[2].0, "doc2");
        assert!(got[2].1.abs() < 1e-12);
    }

    #[test]
    fn dim_mismatch_and_zero_k() {
        let s = store(vec![("a", ge(&[1.0, 0.0], &[0.0, 0.0]))]);
        let idx = build_index(&s, SimilarityConfig::default()).unwrap();
        assert!(idx.search_topk("q", &ge(&[1.0], &[0.0]), 1).is_err());
        assert!(idx.search_topk("q", &ge(&[1.0, 0.0], &[0.0, 0.0]), 0).is_err());
    }

    fn corpus() -> impl Strategy<Value = (Vec<(Vec<f64>, Vec<f64>)>, Vec<f64>)> {
        (1usize..6).prop_flat_map(|d| {
            let rec = (prop::collection::vec(-1.0f64..1.0, d), prop::collection::vec(0.0f64..0.5, d));
            (prop::collection::vec(rec, 1..30), prop::collection::vec(-1.0f64..1.0, d))
        })
    }

    proptest! {
        #[test]
        fn topk_matches_full_sort((docs, q) in corpus(), beta in 0.0f64..2.0, k in 1usize..40) {
            prop_assume!(q.iter().any(|x| x.abs() > 1e-3));
            prop_assume!(docs.iter().all(|(m, _)| m.iter().any(|x| x.abs() > 1e-3)));
            let cfg = SimilarityConfig::probit(beta);
            let recs: Vec<EmbeddingRecord> = docs.iter().enumerate()
                .map(|(i, (m, v))| EmbeddingRecord::new(format!("d{i:02}"), GaussianEmbedding::new(m.clone(), v.clone()).unwrap()))
                .collect();
            let s = EmbeddingStore::from_records("m", q.len(), recs.clone()).unwrap();
            let query = GaussianEmbedding::new(q.clone(), vec![0.05; q.len()]).unwrap();
            let idx = build_index(&s, cfg).unwrap();
            let got = idx.search_topk("q", &query, k).unwrap();

            let mut oracle: Vec<(String, f64)> = recs.iter()
                .map(|r| (r.id.clone(), score_pair(&query, &r.embedding, &cfg).unwrap()))
                .collect();
            oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            oracle.truncate(k);
            prop_assert_eq!(got.hits.len(), oracle.len());
            for (h, (id, s)) in got.hits.iter().zip(&oracle) {
                // Single-precision variances perturb scores far below this.
                prop_assert!((h.score - s).abs() < 1e-6);
                // Ids agree unless the oracle's scores are tied at that precision.
                if &h.doc_id != id {
                    let other = oracle.iter().find(|(i, _)| i == &h.doc_id).map(|x| x.1).unwrap_or(f64::NAN);
                    prop_assert!((other - s).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn uniform_doc_variance_keeps_dot_ranking(means in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 2..15),
                                                  v in 0.0f64..3.0, beta in 0.0f64..2.0) {
            // Unit-norm docs with identical isotropic variance share σ_s².
            let docs: Vec<Vec<f64>> = means.into_iter()
                .filter_map(|m| {
                    let n = m.iter().map(|x| x * x).sum::<f64>().sqrt();
                    (n > 1e-3).then(|| m.iter().map(|x| x / n).collect())
                })
                .collect();
            prop_assume!(!docs.is_empty());
            let recs = docs.iter().enumerate().map(|(i, m)| {
                EmbeddingRecord::new(format!("d{i:02}"), GaussianEmbedding::new(m.clone(), vec![v; 3]).unwrap())
            });
            let s = EmbeddingStore::from_records("m", 3, recs).unwrap();
            let q = GaussianEmbedding::new(vec![0.6, 0.0, 0.8], vec![0.0; 3]).unwrap();
            let probit = build_index(&s, SimilarityConfig::probit(beta)).unwrap().search_topk("q", &q, 100).unwrap();
            let dot = build_index(&s, SimilarityConfig::mean_dot()).unwrap().search_topk("q", &q, 100).unwrap();
            let a: Vec<_> = probit.hits.iter().map(|h| &h.doc_id).collect();
            let b: Vec<_> = dot.hits.iter().map(|h| &h.doc_id).collect();
            prop_assert_eq!(a, b);
        }
    }
}
