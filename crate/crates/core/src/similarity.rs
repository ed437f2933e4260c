//! Uncertainty-aware similarity between Gaussian embeddings.
//!
//! The dot product `s = qᵀc` of two independent diagonal Gaussians is moment
//! matched to `N(μ_s, σ_s²)`:
//!
//! ```text
//! μ_s  = μ_qᵀμ_c
//! σ_s² = μ_qᵀΣ_cμ_q + μ_cᵀΣ_qμ_c + tr(Σ_qΣ_c)
//! ```
//!
//! and shrunk with the probit factor `ŝ = μ_s / √(1 + (π/8)·β·σ_s²)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{check_dim, dot, GaussianEmbedding};

/// Grid searched for `β` on small specialist ensembles.
pub const BETA_GRID: [f64; 4] = [0.0001, 0.001, 0.01, 0.1];
pub const DEFAULT_BETA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    MeanDot,
    UncertaintyProbit,
}

impl fmt::Display for SimilarityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MeanDot => "dot",
            Self::UncertaintyProbit => "probit",
        })
    }
}

impl FromStr for SimilarityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" | "mean_dot" => Ok(Self::MeanDot),
            "probit" | "uncertainty_probit" => Ok(Self::UncertaintyProbit),
            other => Err(Error::InvalidConfig(format!("unknown similarity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    pub beta: f64,
    pub mode: SimilarityMode,
    pub normalize_inputs: bool,
    /// Keep the `tr(Σ_qΣ_c)` term of `σ_s²`.
    #[serde(default = "default_true")]
    pub include_trace_term: bool,
}

fn default_true() -> bool {
    true
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            mode: SimilarityMode::UncertaintyProbit,
            normalize_inputs: true,
            include_trace_term: true,
        }
    }
}

impl SimilarityConfig {
    pub fn mean_dot() -> Self {
        Self {
            mode: SimilarityMode::MeanDot,
            ..Self::default()
        }
    }

    pub fn probit(beta: f64) -> Self {
        Self {
            beta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta must be >= 0, got {}", self.beta)));
        }
        Ok(())
    }
}

/// First two moments of a Gaussian dot product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DotMoments {
    pub mu_s: f64,
    pub sigma_s_sq: f64,
}

pub fn dot_moments(q: &GaussianEmbedding, c: &GaussianEmbedding) -> Result<DotMoments> {
    dot_moments_with(q, c, true)
}

pub fn dot_moments_with(q: &GaussianEmbedding, c: &GaussianEmbedding, include_trace_term: bool) -> Result<DotMoments> {
    check_dim(q.dim(), c.dim())?;
    let (mq, vq, mc, vc) = (q.mean(), q.var(), c.mean(), c.var());
    let mut mu = 0.0;
    let mut var = 0.0;
    for d in 0..q.dim() {
        mu += mq[d] * mc[d];
        var += mq[d] * mq[d] * vc[d] + mc[d] * mc[d] * vq[d];
        if include_trace_term {
            var += vq[d] * vc[d];
        }
    }
    Ok(DotMoments {
        mu_s: mu,
        sigma_s_sq: var,
    })
}

/// `μ_s / √(1 + (π/8)·β·σ_s²)`.
pub fn probit_score(m: DotMoments, beta: f64) -> f64 {
    m.mu_s / (1.0 + PI / 8.0 * beta * m.sigma_s_sq).sqrt()
}

pub fn score_pair(q: &GaussianEmbedding, c: &GaussianEmbedding, cfg: &SimilarityConfig) -> Result<f64> {
    cfg.validate()?;
    let (q, c) = if cfg.normalize_inputs {
        (q.l2_normalize()?, c.l2_normalize()?)
    } else {
        (q.clone(), c.clone())
    };
    match cfg.mode {
        SimilarityMode::MeanDot => {
            check_dim(q.dim(), c.dim())?;
            Ok(dot(q.mean(), c.mean()))
        }
        SimilarityMode::UncertaintyProbit => {
            Ok(probit_score(dot_moments_with(&q, &c, cfg.include_trace_term)?, cfg.beta))
        }
    }
}

const LANES: usize = 4;

/// Dot product with `LANES` independent partial sums.
#[inline]
fn lane_dot(x: &[f64], y: &[f64]) -> f64 {
    let (xc, xt) = x.as_chunks::<LANES>();
    let (yc, yt) = y.as_chunks::<LANES>();
    let mut acc = [0.0; LANES];
    for (xs, ys) in xc.iter().zip(yc) {
        for l in 0..LANES {
            acc[l] += xs[l] * ys[l];
        }
    }
    acc.iter().sum::<f64>() + xt.iter().zip(yt).map(|(a, b)| a * b).sum::<f64>()
}

/// Query-side terms precomputed for scanning many candidates.
///
/// With `a_d = μ_{q,d}² + σ_{q,d}²` and `b_d = σ_{q,d}²` the variance is
/// `Σ_d a_d σ_{c,d}² + b_d μ_{c,d}²`, so each candidate costs one fused pass.
/// Candidate variances may be stored in either float width.
#[derive(Debug, Clone)]
pub struct QueryKernel {
    mean: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    cfg: SimilarityConfig,
}

impl QueryKernel {
    /// `query` must already be normalized if the config asks for it.
    pub fn new(query: &GaussianEmbedding, cfg: SimilarityConfig) -> Self {
        let mean = query.mean().to_vec();
        let b = query.var().to_vec();
        let a = mean
            .iter()
            .zip(&b)
            .map(|(m, v)| m * m + if cfg.include_trace_term { *v } else { 0.0 })
            .collect();
        Self { mean, a, b, cfg }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    #[inline]
    pub fn moments<V: Copy + Into<f64>>(&self, mean: &[f64], var: &[V]) -> DotMoments {
        let n = self.mean.len().min(mean.len()).min(var.len());
        let (q, qt) = self.mean[..n].as_chunks::<LANES>();
        let (a, at) = self.a[..n].as_chunks::<LANES>();
        let (b, bt) = self.b[..n].as_chunks::<LANES>();
        let (m, mt) = mean[..n].as_chunks::<LANES>();
        let (v, vt) = var[..n].as_chunks::<LANES>();
        let mut mu = [0.0; LANES];
        let mut s = [0.0; LANES];
        for ((((q, a), b), m), v) in q.iter().zip(a).zip(b).zip(m).zip(v) {
            for l in 0..LANES {
                let c = m[l];
                mu[l] += q[l] * c;
                s[l] += a[l] * v[l].into() + b[l] * (c * c);
            }
        }
        for l in 0..qt.len() {
            let c = mt[l];
            mu[l] += qt[l] * c;
            s[l] += at[l] * vt[l].into() + bt[l] * (c * c);
        }
        let (mu_s, sigma_s_sq) = (mu.iter().sum(), s.iter().sum());
        DotMoments { mu_s, sigma_s_sq }
    }

    /// Score against a candidate given as raw mean/variance slices.
    #[inline]
    pub fn score<V: Copy + Into<f64>>(&self, mean: &[f64], var: &[V]) -> f64 {
        match self.cfg.mode {
            SimilarityMode::MeanDot => lane_dot(&self.mean, mean),
            SimilarityMode::UncertaintyProbit => probit_score(self.moments(mean, var), self.cfg.beta),
        }
    }
}

/// Running sample statistics of `z_qᵀz_c` under independent sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McDotSummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    /// Fourth central moment, for the standard error of `variance`.
    pub fourth_central: f64,
}

impl McDotSummary {
    pub fn se_mean(&self) -> f64 {
        (self.variance / self.n as f64).sqrt()
    }

    /// Large-sample standard error of the sample variance.
    pub fn se_variance(&self) -> f64 {
        ((self.fourth_central - self.variance * self.variance).max(0.0) / self.n as f64).sqrt()
    }
}

/// Draws `n_samples` pairs `z_q ~ N(μ_q, Σ_q)`, `z_c ~ N(μ_c, Σ_c)` and
/// summarizes `z_qᵀz_c`. Deterministic for a given seed.
pub fn mc_dot_summary(q: &GaussianEmbedding, c: &GaussianEmbedding, n_samples: usize, seed: u64) -> Result<McDotSummary> {
    check_dim(q.dim(), c.dim())?;
    if n_samples == 0 {
        return Err(Error::InvalidConfig("n_samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sq: Vec<f64> = q.var().iter().map(|v| v.sqrt()).collect();
    let sc: Vec<f64> = c.var().iter().map(|v| v.sqrt()).collect();
    let (mq, mc) = (q.mean(), c.mean());
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut s = 0.0;
        for d in 0..mq.len() {
            let eq: f64 = StandardNormal.sample(&mut rng);
            let ec: f64 = StandardNormal.sample(&mut rng);
            s += (mq[d] + sq[d] * eq) * (mc[d] + sc[d] * ec);
        }
        samples.push(s);
    }
    let n = n_samples as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for s in &samples {
        let d2 = (s - mean) * (s - mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    Ok(McDotSummary {
        n: n_samples,
        mean,
        variance: m2 / n,
        fourth_central: m4 / n,
    })
}

/// Empirical moments of the dot product by sampling.
pub fn mc_moments_oracle(q: &GaussianEmbedding, c: &GaussianEmbedding, n_samples: usize, seed: u64) -> Result<DotMoments> {
    let s = mc_dot_summary(q, c, n_samples, seed)?;
    Ok(DotMoments {
        mu_s: s.mean,
        sigma_s_sq: s.variance,
    })
}
