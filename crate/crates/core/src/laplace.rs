//! Diagonal last-layer Laplace approximation.
//!
//! A logistic relevance head `p(y=1 | q, p) = σ(wᵀ(q ⊙ p))` is fitted to
//! labeled query/passage pairs with a Gaussian prior `N(0, λ⁻¹ I)`. The
//! posterior over `w` is approximated by `N(ŵ, diag(H)⁻¹)` where `H` is the
//! Hessian of the negative log posterior at the MAP estimate.
//!
//! The per-weight variances `v` turn a deterministic embedding `h` into a
//! Gaussian one with `mean = h` and `var_d = h_d² v_d`, the per-term split
//! of `hᵀ diag(v) h`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::tsv::LabeledPair;
use crate::newton::{self, Objective};
use crate::types::{check_dim, EmbeddingRecord, EmbeddingStore, GaussianEmbedding};

/// One labeled query/passage pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairExample {
    pub query_features: Vec<f64>,
    pub passage_features: Vec<f64>,
    pub relevant: bool,
}

impl PairExample {
    pub fn new(query_features: Vec<f64>, passage_features: Vec<f64>, relevant: bool) -> Result<Self> {
        check_dim(query_features.len(), passage_features.len())?;
        Ok(Self {
            query_features,
            passage_features,
            relevant,
        })
    }

    pub fn dim(&self) -> usize {
        self.query_features.len()
    }

    pub fn features(&self) -> Vec<f64> {
        self.query_features
            .iter()
            .zip(&self.passage_features)
            .map(|(q, p)| q * p)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceFitConfig {
    pub prior_precision: f64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
}

impl Default for LaplaceFitConfig {
    fn default() -> Self {
        Self {
            prior_precision: 1.0,
            max_iterations: 100,
            gradient_tolerance: 1e-8,
        }
    }
}

impl LaplaceFitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.prior_precision > 0.0 && self.prior_precision.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "prior precision must be positive, got {}",
                self.prior_precision
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be positive".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidConfig("gradient_tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Elementwise product `q ⊙ p`; the logit becomes a weighted dot product.
pub fn pair_features(q: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    check_dim(q.len(), p.len())?;
    Ok(q.iter().zip(p).map(|(a, b)| a * b).collect())
}

struct LogisticObjective {
    x: DMatrix<f64>,
    y: Vec<f64>,
    lambda: f64,
}

impl LogisticObjective {
    fn new(dim: usize, data: &[PairExample], lambda: f64) -> Result<Self> {
        let mut x = DMatrix::zeros(data.len(), dim);
        for (n, ex) in data.iter().enumerate() {
            check_dim(dim, ex.dim())?;
            for (d, v) in ex.features().into_iter().enumerate() {
                x[(n, d)] = v;
            }
        }
        Ok(Self {
            x,
            y: data.iter().map(|e| if e.relevant { 1.0 } else { 0.0 }).collect(),
            lambda,
        })
    }

    fn logits(&self, w: &[f64]) -> Vec<f64> {
        (0..self.x.nrows())
            .map(|n| self.x.row(n).iter().zip(w).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl Objective for LogisticObjective {
    fn value(&self, w: &[f64]) -> f64 {
        let ce: f64 = self
            .logits(w)
            .iter()
            .zip(&self.y)
            .map(|(t, y)| newton::softplus(*t) - y * t)
            .sum();
        ce + 0.5 * self.lambda * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = w.iter().map(|v| self.lambda * v).collect();
        for (n, t) in self.logits(w).into_iter().enumerate() {
            let r = newton::sigmoid(t) - self.y[n];
            for (gd, xd) in g.iter_mut().zip(self.x.row(n).iter()) {
                *gd += r * xd;
            }
        }
        g
    }

    fn hessian(&self, w: &[f64]) -> DMatrix<f64> {
        let dim = self.x.ncols();
        let mut scaled = self.x.clone();
        for (n, t) in self.logits(w).into_iter().enumerate() {
            let p = newton::sigmoid(t);
            scaled.row_mut(n).scale_mut(p * (1.0 - p));
        }
        let mut h = self.x.transpose() * scaled;
        for d in 0..dim {
            h[(d, d)] += self.lambda;
        }
        h
    }
}

/// Result of a MAP fit, with the optimizer's trajectory.
#[derive(Debug, Clone)]
pub struct MapFit {
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Objective value before the first step and after each accepted step.
    pub objective_history: Vec<f64>,
}

/// MAP weights of the ridge-regularized logistic head.
pub fn fit_map(dim: usize, data: &[PairExample], cfg: &LaplaceFitConfig) -> Result<Vec<f64>> {
    fit_map_detailed(dim, data, cfg).map(|f| f.weights)
}

/// [`fit_map`] plus convergence diagnostics.
pub fn fit_map_detailed(dim: usize, data: &[PairExample], cfg: &LaplaceFitConfig) -> Result<MapFit> {
    cfg.validate()?;
    if dim == 0 {
        return Err(Error::InvalidConfig("dimension must be positive".into()));
    }
    let obj = LogisticObjective::new(dim, data, cfg.prior_precision)?;
    let trace = newton::minimize(&obj, vec![0.0; dim], cfg.max_iterations, cfg.gradient_tolerance)?;
    Ok(MapFit {
        weights: trace.weights,
        iterations: trace.iterations,
        gradient_norm: trace.gradient_norm,
        objective_history: trace.objective,
    })
}

/// `v_d = 1 / (λ + Σ_n p_n (1 − p_n) φ_{n,d}²)` with `p_n = σ(ŵᵀφ_n)`.
pub fn diag_posterior_variance(data: &[PairExample], map_weights: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig(format!("prior precision must be positive, got {lambda}")));
    }
    let dim = map_weights.len();
    let mut precision = vec![lambda; dim];
    for ex in data {
        check_dim(dim, ex.dim())?;
        let phi = ex.features();
        let p = newton::sigmoid(phi.iter().zip(map_weights).map(|(a, b)| a * b).sum());
        let w = p * (1.0 - p);
        for (h, f) in precision.iter_mut().zip(&phi) {
            *h += w * f * f;
        }
    }
    Ok(precision.into_iter().map(|h| 1.0 / h).collect())
}

/// Fitting examples from labeled pairs, using the stored means as features.
pub fn pair_examples(pairs: &[LabeledPair], queries: &EmbeddingStore, docs: &EmbeddingStore) -> Result<Vec<PairExample>> {
    check_dim(queries.dim(), docs.dim())?;
    pairs
        .iter()
        .map(|p| {
            let q = queries.get(&p.query_id).ok_or_else(|| Error::UnknownId(p.query_id.clone()))?;
            let d = docs.get(&p.doc_id).ok_or_else(|| Error::UnknownId(p.doc_id.clone()))?;
            PairExample::new(q.mean().to_vec(), d.mean().to_vec(), p.relevant)
        })
        .collect()
}

/// A fitted diagonal Laplace posterior for one embedding model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplacePosterior {
    pub model_name: String,
    pub dim: usize,
    #[serde(rename = "lambda")]
    pub prior_precision: f64,
    pub map_weights: Vec<f64>,
    pub post_var: Vec<f64>,
    pub n_examples: usize,
}

impl LaplacePosterior {
    /// Fits MAP weights and the diagonal posterior in one go.
    pub fn fit(model_name: impl Into<String>, dim: usize, data: &[PairExample], cfg: &LaplaceFitConfig) -> Result<Self> {
        let map_weights = fit_map(dim, data, cfg)?;
        let post_var = diag_posterior_variance(data, &map_weights, cfg.prior_precision)?;
        let posterior = Self {
            model_name: model_name.into(),
            dim,
            prior_precision: cfg.prior_precision,
            map_weights,
            post_var,
            n_examples: data.len(),
        };
        posterior.validate()?;
        Ok(posterior)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim, self.map_weights.len())?;
        check_dim(self.dim, self.post_var.len())?;
        if !(self.prior_precision > 0.0) {
            return Err(Error::InvalidConfig("posterior lambda must be positive".into()));
        }
        if let Some(d) = self.post_var.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig(format!("posterior variance {d} is not positive")));
        }
        Ok(())
    }

    /// `mean = h`, `var_d = h_d² · v_d`.
    pub fn embed_to_gaussian(&self, h: &[f64]) -> Result<GaussianEmbedding> {
        check_dim(self.dim, h.len())?;
        let var = h.iter().zip(&self.post_var).map(|(x, v)| x * x * v).collect();
        GaussianEmbedding::new(h.to_vec(), var)
    }

    /// Replaces every record's variance with the posterior-induced one.
    pub fn probabilize_store(&self, store: &EmbeddingStore) -> Result<EmbeddingStore> {
        check_dim(self.dim, store.dim())?;
        let records = store
            .records()
            .iter()
            .map(|r| Ok(EmbeddingRecord::new(r.id.clone(), self.embed_to_gaussian(r.embedding.mean())?)))
            .collect::<Result<Vec<_>>>()?;
        EmbeddingStore::from_records(store.model_name(), store.dim(), records)
    }
}
