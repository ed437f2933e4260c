//! Uncertainty-driven ensemble coefficients and Gaussian convolution.
//!
//! For `K` independent Gaussian embeddings `z_k ~ N(μ_k, Σ_k)` and simplex
//! weights `π`, the combination `Σ π_k z_k` is Gaussian with mean `Σ π_k μ_k`
//! and covariance `Σ π_k² Σ_k`. Weights are inverse-cost: `π_k ∝ (1/c_k)^τ`,
//! with `c_k = tr(Σ_k)` (bayes) or `c_k = tr(Σ_k) + ‖μ_k‖²` (full form).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{check_dim, EmbeddingRecord, EmbeddingStore, EnsembleInput, GaussianEmbedding};

/// Temperature used for small specialist ensembles.
pub const DEFAULT_TEMPERATURE: f64 = 1.5;
/// Temperature used for large multi-task benchmark runs.
pub const BENCHMARK_TEMPERATURE: f64 = 1.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientMode {
    BayesInverseTrace,
    FullForm,
    Uniform,
    Fixed,
}

impl fmt::Display for CoefficientMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::BayesInverseTrace => "bayes",
            Self::FullForm => "full",
            Self::Uniform => "uniform",
            Self::Fixed => "fixed",
        })
    }
}

impl FromStr for CoefficientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bayes" | "bayes_inverse_trace" => Ok(Self::BayesInverseTrace),
            "full" | "full_form" => Ok(Self::FullForm),
            "uniform" => Ok(Self::Uniform),
            "fixed" => Ok(Self::Fixed),
            other => Err(Error::InvalidConfig(format!("unknown coefficient mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientConfig {
    pub mode: CoefficientMode,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_weights: Option<Vec<f64>>,
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        Self::bayes(DEFAULT_TEMPERATURE)
    }
}

impl CoefficientConfig {
    pub fn bayes(temperature: f64) -> Self {
        Self {
            mode: CoefficientMode::BayesInverseTrace,
            temperature,
            fixed_weights: None,
        }
    }

    pub fn uniform() -> Self {
        Self {
            mode: CoefficientMode::Uniform,
            temperature: 1.0,
            fixed_weights: None,
        }
    }

    pub fn fixed(weights: Vec<f64>) -> Self {
        Self {
            mode: CoefficientMode::Fixed,
            temperature: 1.0,
            fixed_weights: Some(weights),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        match (&self.mode, &self.fixed_weights) {
            (CoefficientMode::Fixed, None) => {
                Err(Error::InvalidConfig("fixed mode requires weights".into()))
            }
            (CoefficientMode::Fixed, Some(w)) => check_simplex(w),
            (_, Some(_)) => Err(Error::InvalidConfig(
                "weights are only accepted in fixed mode".into(),
            )),
            _ => Ok(()),
        }
    }
}

fn check_simplex(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::InvalidConfig("weights must be nonempty".into()));
    }
    if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidConfig("weights must be finite and nonnegative".into()));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("weights must sum to 1, got {sum}")));
    }
    Ok(())
}

/// Simplex weights over `K` models together with the config that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pi: Vec<f64>,
    provenance: CoefficientConfig,
}

impl Coefficients {
    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn provenance(&self) -> &CoefficientConfig {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }
}

/// `π_k ∝ (1/c_k)^τ`, evaluated in log space.
fn inverse_cost_weights(costs: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if costs.is_empty() {
        return Err(Error::EmptyInput("at least one model is required"));
    }
    if let Some((index, &value)) = costs
        .iter()
        .enumerate()
        .find(|(_, c)| !(**c > 0.0 && c.is_finite()))
    {
        return Err(Error::DegenerateUncertainty { index, value });
    }
    let logits: Vec<f64> = costs.iter().map(|c| -temperature * c.ln()).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / sum).collect())
}

/// Inverse-trace weighting; `τ = 1` is plain inverse-variance weighting.
pub fn bayes_coefficients(traces: &[f64], temperature: f64) -> Result<Coefficients> {
    let provenance = CoefficientConfig::bayes(temperature);
    provenance.validate()?;
    Ok(Coefficients {
        pi: inverse_cost_weights(traces, temperature)?,
        provenance,
    })
}

/// Inverse-cost weighting with `c_k = tr(Σ_k) + ‖μ_k‖²`.
pub fn full_coefficients(traces: &[f64], mean_sq_norms: &[f64], temperature: f64) -> Result<Coefficients> {
    check_dim(traces.len(), mean_sq_norms.len())?;
    let provenance = CoefficientConfig {
        mode: CoefficientMode::FullForm,
        temperature,
        fixed_weights: None,
    };
    provenance.validate()?;
    let costs: Vec<f64> = traces.iter().zip(mean_sq_norms).map(|(t, n)| t + n).collect();
    Ok(Coefficients {
        pi: inverse_cost_weights(&costs, temperature)?,
        provenance,
    })
}

pub fn uniform_coefficients(k: usize) -> Result<Coefficients> {
    if k == 0 {
        return Err(Error::EmptyInput("at least one model is required"));
    }
    Ok(Coefficients {
        pi: vec![1.0 / k as f64; k],
        provenance: CoefficientConfig::uniform(),
    })
}

pub fn fixed_coefficients(weights: &[f64]) -> Result<Coefficients> {
    let provenance = CoefficientConfig::fixed(weights.to_vec());
    provenance.validate()?;
    Ok(Coefficients {
        pi: weights.to_vec(),
        provenance,
    })
}

/// Per-record coefficients for the `K` embeddings of one input.
pub fn coefficients_for(embeddings: &[&GaussianEmbedding], cfg: &CoefficientConfig) -> Result<Coefficients> {
    cfg.validate()?;
    let k = embeddings.len();
    match cfg.mode {
        CoefficientMode::BayesInverseTrace => {
            let traces: Vec<f64> = embeddings.iter().map(|e| e.trace()).collect();
            bayes_coefficients(&traces, cfg.temperature)
        }
        CoefficientMode::FullForm => {
            let traces: Vec<f64> = embeddings.iter().map(|e| e.trace()).collect();
            let norms: Vec<f64> = embeddings.iter().map(|e| e.mean_sq_norm()).collect();
            full_coefficients(&traces, &norms, cfg.temperature)
        }
        CoefficientMode::Uniform => uniform_coefficients(k),
        CoefficientMode::Fixed => {
            let w = cfg.fixed_weights.as_deref().unwrap_or_default();
            check_dim(k, w.len())?;
            fixed_coefficients(w)
        }
    }
}

/// `N(Σ π_k μ_k, Σ π_k² Σ_k)`.
pub fn convolve(embeddings: &[&GaussianEmbedding], coefficients: &Coefficients) -> Result<GaussianEmbedding> {
    let Some(first) = embeddings.first() else {
        return Err(Error::EmptyInput("convolution needs at least one embedding"));
    };
    check_dim(embeddings.len(), coefficients.len())?;
    let dim = first.dim();
    let mut mean = vec![0.0; dim];
    let mut var = vec![0.0; dim];
    for (e, &pi) in embeddings.iter().zip(coefficients.pi()) {
        check_dim(dim, e.dim())?;
        let pi_sq = pi * pi;
        for d in 0..dim {
            mean[d] += pi * e.mean()[d];
            var[d] += pi_sq * e.var()[d];
        }
    }
    GaussianEmbedding::new(mean, var)
}

/// Expected squared distance between positive-pair embeddings, weighted by
/// `π`: `Σ_k π_k (‖μ_k(x) − μ_k(x')‖² + tr Σ_k(x) + tr Σ_k(x'))`.
pub fn surrogate_loss(pi: &[f64], x: &[&GaussianEmbedding], x_pos: &[&GaussianEmbedding]) -> Result<f64> {
    check_dim(pi.len(), x.len())?;
    check_dim(pi.len(), x_pos.len())?;
    let mut total = 0.0;
    for ((p, a), b) in pi.iter().zip(x).zip(x_pos) {
        check_dim(a.dim(), b.dim())?;
        let fidelity: f64 = a.mean().iter().zip(b.mean()).map(|(u, v)| (u - v).powi(2)).sum();
        total += p * (fidelity + a.trace() + b.trace());
    }
    Ok(total)
}

/// Euclidean projection onto the probability simplex.
fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Minimizes `Σ π_k² c_k` over the simplex by projected gradient descent.
///
/// Reference solver for checking closed-form coefficients; the exact
/// minimizer is `π_k ∝ 1/c_k`. Iterates until successive iterates move less
/// than `resolution · min(c)/max(c)` in the ∞-norm, which bounds the distance
/// to the optimum by roughly `resolution`.
pub fn quadratic_simplex_oracle(costs: &[f64], resolution: f64) -> Vec<f64> {
    let k = costs.len();
    if k == 0 {
        return Vec::new();
    }
    let cmax = costs.iter().cloned().fold(f64::MIN, f64::max);
    let cmin = costs.iter().cloned().fold(f64::MAX, f64::min);
    // The objective is 2·cmax-smooth.
    let step = 1.0 / (2.0 * cmax);
    let stop = resolution * (cmin / cmax);
    let mut pi = vec![1.0 / k as f64; k];
    for _ in 0..10_000_000 {
        let moved: Vec<f64> = pi.iter().zip(costs).map(|(p, c)| p - step * 2.0 * c * p).collect();
        let next = project_to_simplex(&moved);
        let delta = next.iter().zip(&pi).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        pi = next;
        if delta <= stop {
            break;
        }
    }
    pi
}

/// Convolves every row of an ensemble with per-record coefficients.
///
/// Returns the convolved store and the coefficients used for each record.
pub fn convolve_ensemble(
    input: &EnsembleInput,
    cfg: &CoefficientConfig,
    model_name: &str,
) -> Result<(EmbeddingStore, Vec<Coefficients>)> {
    cfg.validate()?;
    let mut store = EmbeddingStore::new(model_name, input.dim())?;
    let mut all = Vec::with_capacity(input.len());
    for i in 0..input.len() {
        let row = input.row(i);
        let pi = coefficients_for(&row, cfg)?;
        store.push(EmbeddingRecord::new(input.id(i), convolve(&row, &pi)?))?;
        all.push(pi);
    }
    Ok((store, all))
}
