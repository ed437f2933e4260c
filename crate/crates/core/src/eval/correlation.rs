//! Spearman rank correlation.

use crate::error::{Error, Result};
use crate::similarity::{score_pair, SimilarityConfig};
use crate::types::EmbeddingStore;

/// 1-based ranks; ties get the average of the positions they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's ρ: Pearson correlation of average ranks.
pub fn spearman(pred: &[f64], gold: &[f64]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::DimensionMismatch {
            expected: pred.len(),
            found: gold.len(),
        });
    }
    if pred.len() < 2 {
        return Err(Error::EmptyInput("spearman needs at least two pairs"));
    }
    if pred.iter().chain(gold).any(|v| v.is_nan()) {
        return Err(Error::InvalidConfig("spearman input contains NaN".into()));
    }
    pearson(&average_ranks(pred), &average_ranks(gold))
}

/// Spearman correlation between pair similarities and gold scores.
pub fn sts_spearman(pairs: &[(String, String, f64)], store: &EmbeddingStore, cfg: &SimilarityConfig) -> Result<f64> {
    let mut predicted = Vec::with_capacity(pairs.len());
    for (a, b, _) in pairs {
        let ea = store.get(a).ok_or_else(|| Error::UnknownId(a.clone()))?;
        let eb = store.get(b).ok_or_else(|| Error::UnknownId(b.clone()))?;
        predicted.push(score_pair(ea, eb, cfg)?);
    }
    let gold: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    spearman(&predicted, &gold)
}
