//! Metrics, abstention curves, baselines, ablations and the synthetic
//! specialist corpus.

pub mod abstention;
pub mod correlation;
pub mod metrics;
pub mod pipeline;
pub mod probe;
pub mod profile;
pub mod report;
pub mod synth;

pub use abstention::{abstention_curve, nauc_abstention, AbstentionCurve, AbstentionItem, TieRule};
pub use correlation::{average_ranks, spearman, sts_spearman};
pub use metrics::{ndcg_at_k, recall_at_k, MetricSummary, Qrels};
pub use pipeline::{
    ablation_run, ablation_suite, baseline_suite, run_retrieval, task_arithmetic_baseline, weight_grid,
    weighted_ensemble_baseline, AblationToggles, PipelineConfig, RetrievalData, RetrievalOutcome,
};
pub use probe::{accuracy_and_macro_f1, classify_probe, classify_stores, ClassificationScores, LinearProbe, ProbeConfig};
pub use profile::{coefficient_profile, CoefficientProfile, ProfileRow};
pub use report::{evaluate_run, render_table, MetricReport, MetricSpec};
pub use synth::{synth_generate, SynthData, SynthSpec};
