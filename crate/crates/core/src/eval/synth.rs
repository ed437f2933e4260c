//! Synthetic multi-domain corpus with one specialist model per domain.
//!
//! Every text has a ground-truth unit vector. Model `k` observes it with
//! i.i.d. Gaussian noise per coordinate, small if `k` is the specialist of
//! the text's domain and large otherwise, and reports that noise variance
//! as its embedding variance. Each query is a perturbed copy of one source
//! document; the other documents of the query are near misses of the same
//! source.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::Qrels;
use crate::types::{EmbeddingRecord, EmbeddingStore, EnsembleInput, GaussianEmbedding};

/// Spread of near-miss documents around their source.
const NEAR_MISS_SPREAD: f64 = 1.0;
/// Queries drift from their source by a uniform amount in `[0, MAX_QUERY_DRIFT)`.
const MAX_QUERY_DRIFT: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_models: usize,
    pub n_domains: usize,
    pub queries_per_domain: usize,
    pub docs_per_query: usize,
    pub dim: usize,
    pub specialist_noise: f64,
    pub offdomain_noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_models: 3,
            n_domains: 3,
            queries_per_domain: 25,
            docs_per_query: 4,
            dim: 32,
            specialist_noise: 0.05,
            offdomain_noise: 0.5,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_models", self.n_models),
            ("n_domains", self.n_domains),
            ("queries_per_domain", self.queries_per_domain),
            ("docs_per_query", self.docs_per_query),
            ("dim", self.dim),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
        }
        if !(self.specialist_noise > 0.0 && self.specialist_noise.is_finite()) {
            return Err(Error::InvalidConfig("specialist_noise must be positive".into()));
        }
        if !(self.offdomain_noise.is_finite() && self.specialist_noise < self.offdomain_noise) {
            return Err(Error::InvalidConfig(
                "offdomain_noise must be finite and exceed specialist_noise".into(),
            ));
        }
        Ok(())
    }

    /// Index of the model that specializes in `domain`.
    pub fn specialist(&self, domain: usize) -> usize {
        domain % self.n_models
    }

    pub fn model_name(k: usize) -> String {
        format!("model{k}")
    }
}

pub fn domain_name(domain: usize) -> String {
    format!("dom{domain}")
}

/// Domain label of a record id (the text before the first `:`).
pub fn domain_of(id: &str) -> Option<&str> {
    id.split_once(':').map(|(d, _)| d).filter(|d| !d.is_empty())
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub docs: EnsembleInput,
    pub queries: EnsembleInput,
    pub qrels: Qrels,
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn perturb(rng: &mut ChaCha8Rng, base: &[f64], amount: f64) -> Vec<f64> {
    let u = unit_vector(rng, base.len());
    let v: Vec<f64> = base.iter().zip(&u).map(|(b, x)| b + amount * x).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

struct Observer<'a> {
    spec: &'a SynthSpec,
    stores: Vec<EmbeddingStore>,
}

impl<'a> Observer<'a> {
    fn new(spec: &'a SynthSpec) -> Result<Self> {
        let stores = (0..spec.n_models)
            .map(|k| EmbeddingStore::new(SynthSpec::model_name(k), spec.dim))
            .collect::<Result<_>>()?;
        Ok(Self { spec, stores })
    }

    fn observe(&mut self, rng: &mut ChaCha8Rng, id: &str, domain: usize, truth: &[f64]) -> Result<()> {
        let specialist = self.spec.specialist(domain);
        for (k, store) in self.stores.iter_mut().enumerate() {
            let noise = if k == specialist {
                self.spec.specialist_noise
            } else {
                self.spec.offdomain_noise
            };
            let mean = truth
                .iter()
                .map(|t| {
                    let e: f64 = StandardNormal.sample(rng);
                    t + noise * e
                })
                .collect();
            let var = vec![noise * noise; truth.len()];
            store.push(EmbeddingRecord::new(id, GaussianEmbedding::new(mean, var)?))?;
        }
        Ok(())
    }
}

/// Generates docs, queries and qrels; deterministic for a given spec.
pub fn synth_generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut docs = Observer::new(spec)?;
    let mut queries = Observer::new(spec)?;
    let mut qrels = Qrels::new();
    for domain in 0..spec.n_domains {
        let dom = domain_name(domain);
        for i in 0..spec.queries_per_domain {
            let source = unit_vector(&mut rng, spec.dim);
            let qid = format!("{dom}:q{i:03}");
            for j in 0..spec.docs_per_query {
                let truth = if j == 0 {
                    source.clone()
                } else {
                    perturb(&mut rng, &source, NEAR_MISS_SPREAD)
                };
                let did = format!("{dom}:d{i:03}-{j}");
                docs.observe(&mut rng, &did, domain, &truth)?;
                if j == 0 {
                    qrels.insert(qid.clone(), did, 1);
                }
            }
            let drift = rng.random_range(0.0..MAX_QUERY_DRIFT);
            let truth = perturb(&mut rng, &source, drift);
            queries.observe(&mut rng, &qid, domain, &truth)?;
        }
    }
    Ok(SynthData {
        docs: EnsembleInput::new(docs.stores)?,
        queries: EnsembleInput::new(queries.stores)?,
        qrels,
    })
}
