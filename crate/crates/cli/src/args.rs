use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use uec_core::convolution::{CoefficientConfig, CoefficientMode, DEFAULT_TEMPERATURE};
use uec_core::similarity::{SimilarityConfig, SimilarityMode, DEFAULT_BETA};

/// Gaussian embeddings, uncertainty-weighted ensembles and probit retrieval.
#[derive(Debug, Parser)]
#[command(name = "uec", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a diagonal Laplace posterior on labeled query-passage pairs.
    Fit(FitArgs),
    /// Attach posterior-induced variances to a deterministic store.
    Probabilize(ProbabilizeArgs),
    /// Combine several stores of the same records into one ensemble store.
    Convolve(ConvolveArgs),
    /// Exact top-k search of every query against an index store.
    Search(SearchArgs),
    /// Score a run, an STS pair file or a classification probe.
    Eval(EvalArgs),
    /// Generate the synthetic specialist corpus.
    Synth(SynthArgs),
    /// Run the ablation grid and baselines on a data directory.
    Ablate(AblateArgs),
    /// Mean ensemble coefficient per query domain, as CSV.
    Profile(ProfileArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// TSV of `query_id  doc_id  label` with labels 0/1.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Deterministic store holding the pair embeddings.
    #[arg(long)]
    pub store: PathBuf,
    /// Separate store for query ids; defaults to `--store`.
    #[arg(long)]
    pub query_store: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub prior_precision: f64,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub gradient_tolerance: Option<f64>,
    /// Posterior JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProbabilizeArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub posterior: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Bayes,
    Full,
    Uniform,
    Fixed,
}

#[derive(Debug, Args)]
pub struct CoefficientArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Bayes)]
    pub mode: ModeArg,
    /// Comma-separated simplex weights, fixed mode only.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    pub temperature: f64,
}

impl CoefficientArgs {
    pub fn config(&self) -> CoefficientConfig {
        CoefficientConfig {
            mode: match self.mode {
                ModeArg::Bayes => CoefficientMode::BayesInverseTrace,
                ModeArg::Full => CoefficientMode::FullForm,
                ModeArg::Uniform => CoefficientMode::Uniform,
                ModeArg::Fixed => CoefficientMode::Fixed,
            },
            temperature: self.temperature,
            fixed_weights: self.weights.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct ConvolveArgs {
    /// Input stores, one per model, describing the same ids.
    #[arg(required = true)]
    pub stores: Vec<PathBuf>,
    #[command(flatten)]
    pub coefficients: CoefficientArgs,
    /// Model name recorded in the output store.
    #[arg(long, default_value = "ensemble")]
    pub name: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the per-record coefficients as CSV.
    #[arg(long)]
    pub coefficients_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimilarityArg {
    Probit,
    Dot,
}

#[derive(Debug, Args)]
pub struct SimilarityArgs {
    #[arg(long, value_enum, default_value_t = SimilarityArg::Probit)]
    pub similarity: SimilarityArg,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    /// Score raw embeddings instead of l2-normalized ones.
    #[arg(long)]
    pub no_normalize: bool,
}

impl SimilarityArgs {
    pub fn config(&self) -> SimilarityConfig {
        SimilarityConfig {
            beta: self.beta,
            mode: match self.similarity {
                SimilarityArg::Probit => SimilarityMode::UncertaintyProbit,
                SimilarityArg::Dot => SimilarityMode::MeanDot,
            },
            normalize_inputs: !self.no_normalize,
            ..SimilarityConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[command(flatten)]
    pub similarity: SimilarityArgs,
    /// Output run TSV.
    #[arg(long)]
    pub run: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Retrieval,
    Sts,
    Classification,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum, default_value_t = Task::Retrieval)]
    pub task: Task,
    /// Comma-separated metrics; defaults depend on the task.
    #[arg(long)]
    pub metrics: Option<String>,
    /// Run TSV (retrieval).
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Qrels TSV (retrieval).
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    /// Gold `id_a  id_b  score` TSV (sts).
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Store holding both sides of every pair (sts).
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[command(flatten)]
    pub similarity: SimilarityArgs,
    /// Training store (classification).
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Test store (classification).
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// `id  label` TSV covering train and test ids (classification).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Ridge penalty of the classification probe.
    #[arg(long, default_value_t = 0.1)]
    pub l2: f64,
    /// Also write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Overrides the seed of the spec.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON spec; missing fields take their defaults.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Directory with `docs.<model>.uecs`, `queries.<model>.uecs` and `qrels.tsv`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    pub temperature: f64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    /// Skip single-model, uniform, weighted and task-arithmetic baselines.
    #[arg(long)]
    pub no_baselines: bool,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// Query stores, one per model.
    #[arg(long, num_args = 1.., required = true)]
    pub queries: Vec<PathBuf>,
    #[command(flatten)]
    pub coefficients: CoefficientArgs,
    #[arg(long)]
    pub out: PathBuf,
}
