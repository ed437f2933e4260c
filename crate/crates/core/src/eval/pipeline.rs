//! End-to-end retrieval runs, the ablation grid and ensemble baselines.

use serde::{Deserialize, Serialize};

use crate::convolution::{convolve_ensemble, CoefficientConfig, Coefficients};
use crate::error::{Error, Result};
use crate::eval::metrics::Qrels;
use crate::eval::report::{evaluate_run, MetricReport, MetricSpec};
use crate::retrieval::{Index, QueryResult, RunRanking};
use crate::similarity::{SimilarityConfig, SimilarityMode};
use crate::types::{check_dim, EmbeddingRecord, EmbeddingStore, EnsembleInput, GaussianEmbedding};

/// Multi-model document and query embeddings with relevance judgments.
#[derive(Debug, Clone)]
pub struct RetrievalData {
    pub docs: EnsembleInput,
    pub queries: EnsembleInput,
    pub qrels: Qrels,
}

impl From<crate::eval::synth::SynthData> for RetrievalData {
    fn from(d: crate::eval::synth::SynthData) -> Self {
        Self {
            docs: d.docs,
            queries: d.queries,
            qrels: d.qrels,
        }
    }
}

impl RetrievalData {
    pub fn new(docs: EnsembleInput, queries: EnsembleInput, qrels: Qrels) -> Result<Self> {
        check_dim(docs.n_models(), queries.n_models())?;
        check_dim(docs.dim(), queries.dim())?;
        Ok(Self { docs, queries, qrels })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub coefficients: CoefficientConfig,
    pub similarity: SimilarityConfig,
    pub k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            coefficients: CoefficientConfig::default(),
            similarity: SimilarityConfig::default(),
            k: 10,
        }
    }
}

impl PipelineConfig {
    /// NDCG@k, Recall@k and nAUC@k.
    pub fn metrics(&self) -> [MetricSpec; 3] {
        [MetricSpec::Ndcg(self.k), MetricSpec::Recall(self.k), MetricSpec::NaucNdcg(self.k)]
    }
}

#[derive(Debug, Clone)]
pub struct RetrievalOutcome {
    pub results: Vec<QueryResult>,
    pub run: RunRanking,
    pub query_coefficients: Vec<Coefficients>,
    pub report: MetricReport,
}

/// Convolves both sides, searches every query and scores the run.
pub fn run_retrieval(data: &RetrievalData, cfg: &PipelineConfig, label: &str) -> Result<RetrievalOutcome> {
    let (docs, _) = convolve_ensemble(&data.docs, &cfg.coefficients, "ensemble")?;
    let (queries, query_coefficients) = convolve_ensemble(&data.queries, &cfg.coefficients, "ensemble")?;
    let (results, run, report) = search_and_score(&docs, &queries, &data.qrels, cfg, label)?;
    Ok(RetrievalOutcome {
        results,
        run,
        query_coefficients,
        report,
    })
}

fn search_and_score(
    docs: &EmbeddingStore,
    queries: &EmbeddingStore,
    qrels: &Qrels,
    cfg: &PipelineConfig,
    label: &str,
) -> Result<(Vec<QueryResult>, RunRanking, MetricReport)> {
    let index = Index::build(docs, cfg.similarity)?;
    let results = index.search_batch(queries, cfg.k)?;
    let run = RunRanking::from_results(&results);
    let report = evaluate_run(label, &run, qrels, &cfg.metrics())?;
    Ok((results, run, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationToggles {
    pub unc_sim: bool,
    pub unc_conv: bool,
}

impl AblationToggles {
    /// Full model first, then each component removed, then both.
    pub const ALL: [Self; 4] = [
        Self { unc_sim: true, unc_conv: true },
        Self { unc_sim: false, unc_conv: true },
        Self { unc_sim: true, unc_conv: false },
        Self { unc_sim: false, unc_conv: false },
    ];

    pub fn label(&self) -> &'static str {
        match (self.unc_sim, self.unc_conv) {
            (true, true) => "full",
            (false, true) => "-UncSim",
            (true, false) => "-UncConv",
            (false, false) => "-UncSim,-UncConv",
        }
    }

    pub fn apply(&self, base: &PipelineConfig) -> PipelineConfig {
        let mut cfg = base.clone();
        if !self.unc_sim {
            cfg.similarity.mode = SimilarityMode::MeanDot;
        }
        if !self.unc_conv {
            cfg.coefficients = CoefficientConfig::uniform();
        }
        cfg
    }
}

pub fn ablation_run(data: &RetrievalData, toggles: AblationToggles, base: &PipelineConfig) -> Result<MetricReport> {
    Ok(run_retrieval(data, &toggles.apply(base), toggles.label())?.report)
}

/// All four toggle combinations, in [`AblationToggles::ALL`] order.
pub fn ablation_suite(data: &RetrievalData, base: &PipelineConfig) -> Result<Vec<MetricReport>> {
    AblationToggles::ALL.iter().map(|t| ablation_run(data, *t, base)).collect()
}

/// `a + α(b − c)`.
pub fn task_arithmetic_baseline(a: &[f64], b: &[f64], c: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_dim(a.len(), b.len())?;
    check_dim(a.len(), c.len())?;
    Ok(a.iter().zip(b).zip(c).map(|((a, b), c)| a + alpha * (b - c)).collect())
}

pub const TASK_ARITHMETIC_ALPHAS: [f64; 5] = [0.0001, 0.001, 0.01, 0.1, 1.0];

fn task_arithmetic_store(input: &EnsembleInput, alpha: f64) -> Result<EmbeddingStore> {
    if input.n_models() < 3 {
        return Err(Error::InvalidConfig("task arithmetic needs at least three models".into()));
    }
    let mut store = EmbeddingStore::new("task-arithmetic", input.dim())?;
    for i in 0..input.len() {
        let row = input.row(i);
        let mean = task_arithmetic_baseline(row[0].mean(), row[1].mean(), row[2].mean(), alpha)?;
        store.push(EmbeddingRecord::new(input.id(i), GaussianEmbedding::deterministic(mean)?))?;
    }
    Ok(store)
}

/// Merged embedding `model0 + α(model1 − model2)` scored with the mean dot product.
pub fn task_arithmetic_run(data: &RetrievalData, alpha: f64, k: usize) -> Result<MetricReport> {
    let cfg = PipelineConfig {
        similarity: SimilarityConfig::mean_dot(),
        k,
        ..PipelineConfig::default()
    };
    let docs = task_arithmetic_store(&data.docs, alpha)?;
    let queries = task_arithmetic_store(&data.queries, alpha)?;
    Ok(search_and_score(&docs, &queries, &data.qrels, &cfg, &format!("task-arithmetic a={alpha}"))?.2)
}

/// Simplex points on a 0.1 grid with every weight at least 0.1.
pub fn weight_grid(k: usize) -> Vec<Vec<f64>> {
    fn fill(remaining: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(prefix.iter().map(|t| *t as f64 / 10.0).collect());
            prefix.pop();
            return;
        }
        for t in 1..=remaining.saturating_sub(slots - 1) {
            prefix.push(t);
            fill(remaining - t, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if (1..=10).contains(&k) {
        fill(10, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Best fixed-weight ensemble by NDCG@k, selected on the evaluation queries.
pub fn weighted_ensemble_baseline(data: &RetrievalData, base: &PipelineConfig) -> Result<(Vec<f64>, MetricReport)> {
    let ndcg = MetricSpec::Ndcg(base.k).to_string();
    let mut best: Option<(Vec<f64>, MetricReport)> = None;
    for w in weight_grid(data.docs.n_models()) {
        let cfg = PipelineConfig {
            coefficients: CoefficientConfig::fixed(w.clone()),
            ..base.clone()
        };
        let report = run_retrieval(data, &cfg, "")?.report;
        if best.as_ref().is_none_or(|(_, b)| report.get(&ndcg) > b.get(&ndcg)) {
            best = Some((w, report));
        }
    }
    let (w, mut report) = best.ok_or_else(|| Error::InvalidConfig("no weight grid for this many models".into()))?;
    let shown: Vec<String> = w.iter().map(|x| format!("{x:.1}")).collect();
    report.label = format!("weighted [{}] (oracle-on-test)", shown.join(","));
    Ok((w, report))
}

/// Individual models, uniform and weighted ensembles, task arithmetic, and the
/// configured uncertainty-aware ensemble.
pub fn baseline_suite(data: &RetrievalData, base: &PipelineConfig) -> Result<Vec<MetricReport>> {
    let n = data.docs.n_models();
    let mut reports = Vec::new();
    for m in 0..n {
        let mut w = vec![0.0; n];
        w[m] = 1.0;
        let cfg = PipelineConfig {
            coefficients: CoefficientConfig::fixed(w),
            ..base.clone()
        };
        let name = data.docs.stores()[m].model_name().to_owned();
        reports.push(run_retrieval(data, &cfg, &name)?.report);
    }
    let uniform = PipelineConfig {
        coefficients: CoefficientConfig::uniform(),
        ..base.clone()
    };
    reports.push(run_retrieval(data, &uniform, "uniform")?.report);
    if n <= 10 {
        reports.push(weighted_ensemble_baseline(data, base)?.1);
    }
    if n >= 3 {
        let ndcg = MetricSpec::Ndcg(base.k).to_string();
        let mut best: Option<MetricReport> = None;
        for alpha in TASK_ARITHMETIC_ALPHAS {
            let r = task_arithmetic_run(data, alpha, base.k)?;
            if best.as_ref().is_none_or(|b| r.get(&ndcg) > b.get(&ndcg)) {
                best = Some(r);
            }
        }
        if let Some(mut r) = best {
            r.label.push_str(" (oracle-on-test)");
            reports.push(r);
        }
    }
    reports.push(run_retrieval(data, base, "uec")?.report);
    Ok(reports)
}
