//! Uncertainty-aware ensembles of text embedding models.
//!
//! Deterministic embeddings become diagonal Gaussians through a last-layer
//! Laplace approximation ([`laplace`]), several models are fused by a
//! Gaussian convolution with inverse-uncertainty weights ([`convolution`]),
//! and candidates are ranked by a moment-matched, variance-shrunk dot product
//! ([`similarity`], [`retrieval`]). [`eval`] holds the metrics, baselines and
//! the synthetic specialist corpus; [`io`] the on-disk formats.

pub mod convolution;
pub mod error;
pub mod eval;
pub mod io;
pub mod laplace;
mod newton;
pub mod retrieval;
pub mod similarity;
pub mod types;

pub use convolution::{
    bayes_coefficients, coefficients_for, convolve, convolve_ensemble, full_coefficients, quadratic_simplex_oracle,
    surrogate_loss, uniform_coefficients, CoefficientConfig, CoefficientMode, Coefficients, DEFAULT_TEMPERATURE,
};
pub use error::{Error, FormatError, Result};
pub use eval::{Qrels, SynthSpec};
pub use laplace::{fit_map, pair_examples, LaplaceFitConfig, LaplacePosterior, PairExample};
pub use retrieval::{build_index, Hit, Index, QueryResult, RunRanking};
pub use similarity::{dot_moments, probit_score, score_pair, DotMoments, SimilarityConfig, SimilarityMode, DEFAULT_BETA};
pub use types::{l2_normalize, trace, EmbeddingRecord, EmbeddingStore, EnsembleInput, GaussianEmbedding};
