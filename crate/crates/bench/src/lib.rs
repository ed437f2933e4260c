//! Random inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use uec_core::laplace::PairExample;
use uec_core::types::{EmbeddingRecord, EmbeddingStore, EnsembleInput, GaussianEmbedding};

pub fn random_gaussian(rng: &mut ChaCha8Rng, dim: usize) -> GaussianEmbedding {
    let mean = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let var = (0..dim).map(|_| rng.random_range(0.0..0.1)).collect();
    GaussianEmbedding::new(mean, var).unwrap()
}

/// `n` records `r0`, `r1`, … with standard normal means and small variances.
pub fn random_store(model: &str, n: usize, dim: usize, seed: u64) -> EmbeddingStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n).map(|i| EmbeddingRecord::new(format!("r{i}"), random_gaussian(&mut rng, dim)));
    EmbeddingStore::from_records(model, dim, records).unwrap()
}

pub fn random_ensemble(models: usize, n: usize, dim: usize, seed: u64) -> EnsembleInput {
    let stores = (0..models)
        .map(|k| random_store(&format!("m{k}"), n, dim, seed + k as u64))
        .collect();
    EnsembleInput::new(stores).unwrap()
}

/// Pairs labeled by the sign of a hidden linear score.
pub fn random_pairs(n: usize, dim: usize, seed: u64) -> Vec<PairExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    (0..n)
        .map(|_| {
            let q: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let p: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let s: f64 = (0..dim).map(|d| w[d] * q[d] * p[d]).sum();
            let noise: f64 = StandardNormal.sample(&mut rng);
            PairExample::new(q, p, s + noise > 0.0).unwrap()
        })
        .collect()
}
