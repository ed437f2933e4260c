//! Linear classification probe and accuracy / macro-F1.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::newton::{self, Objective};
use crate::types::EmbeddingStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub l2: f64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            l2: 0.1,
            max_iterations: 100,
            gradient_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassificationScores {
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Softmax regression with a bias column, weights laid out class-major.
struct SoftmaxObjective {
    x: Vec<Vec<f64>>,
    y: Vec<usize>,
    n_classes: usize,
    l2: f64,
}

impl SoftmaxObjective {
    fn width(&self) -> usize {
        self.x[0].len()
    }

    fn probabilities(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        softmax(&logits(w, x, self.n_classes))
    }
}

fn logits(w: &[f64], x: &[f64], n_classes: usize) -> Vec<f64> {
    let width = x.len();
    (0..n_classes)
        .map(|c| w[c * width..(c + 1) * width].iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl Objective for SoftmaxObjective {
    fn value(&self, w: &[f64]) -> f64 {
        let mut total = 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>();
        for (x, &y) in self.x.iter().zip(&self.y) {
            let z = logits(w, x, self.n_classes);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - z[y];
        }
        total
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let width = self.width();
        let mut g: Vec<f64> = w.iter().map(|v| self.l2 * v).collect();
        for (x, &y) in self.x.iter().zip(&self.y) {
            let p = self.probabilities(w, x);
            for c in 0..self.n_classes {
                let r = p[c] - if c == y { 1.0 } else { 0.0 };
                for (gj, xj) in g[c * width..(c + 1) * width].iter_mut().zip(x) {
                    *gj += r * xj;
                }
            }
        }
        g
    }

    fn hessian(&self, w: &[f64]) -> DMatrix<f64> {
        let width = self.width();
        let size = self.n_classes * width;
        let mut h = DMatrix::identity(size, size) * self.l2;
        for x in &self.x {
            let p = self.probabilities(w, x);
            for c in 0..self.n_classes {
                for c2 in 0..self.n_classes {
                    let s = p[c] * (if c == c2 { 1.0 } else { 0.0 } - p[c2]);
                    if s == 0.0 {
                        continue;
                    }
                    for i in 0..width {
                        for j in 0..width {
                            h[(c * width + i, c2 * width + j)] += s * x[i] * x[j];
                        }
                    }
                }
            }
        }
        h
    }
}

/// Multinomial logistic probe fitted by Newton's method.
#[derive(Debug, Clone)]
pub struct LinearProbe<L> {
    classes: Vec<L>,
    weights: Vec<f64>,
    dim: usize,
}

impl<L: Ord + Clone> LinearProbe<L> {
    pub fn fit(features: &[Vec<f64>], labels: &[L], cfg: &ProbeConfig) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                found: labels.len(),
            });
        }
        let Some(first) = features.first() else {
            return Err(Error::EmptyInput("probe training set"));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidConfig("probe features must be non-empty".into()));
        }
        if !(cfg.l2 > 0.0 && cfg.l2.is_finite()) {
            return Err(Error::InvalidConfig(format!("probe l2 must be > 0, got {}", cfg.l2)));
        }
        let classes: Vec<L> = labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        if classes.len() < 2 {
            return Err(Error::SingleClass);
        }
        let mut x = Vec::with_capacity(features.len());
        for f in features {
            if f.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: f.len(),
                });
            }
            let mut row = f.clone();
            row.push(1.0);
            x.push(row);
        }
        let y = labels
            .iter()
            .map(|l| classes.binary_search(l).expect("label collected above"))
            .collect();
        let obj = SoftmaxObjective {
            x,
            y,
            n_classes: classes.len(),
            l2: cfg.l2,
        };
        let start = vec![0.0; classes.len() * (dim + 1)];
        let trace = newton::minimize(&obj, start, cfg.max_iterations, cfg.gradient_tolerance)?;
        Ok(Self {
            classes,
            weights: trace.weights,
            dim,
        })
    }

    pub fn classes(&self) -> &[L] {
        &self.classes
    }

    pub fn predict(&self, features: &[f64]) -> Result<L> {
        if features.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: features.len(),
            });
        }
        let mut x = features.to_vec();
        x.push(1.0);
        let z = logits(&self.weights, &x, self.classes.len());
        let best = (0..z.len()).fold(0, |b, c| if z[c] > z[b] { c } else { b });
        Ok(self.classes[best].clone())
    }
}

/// Accuracy and macro-F1 over the union of gold and predicted labels.
pub fn accuracy_and_macro_f1<L: Ord + Clone>(predicted: &[L], gold: &[L]) -> Result<ClassificationScores> {
    if predicted.len() != gold.len() {
        return Err(Error::DimensionMismatch {
            expected: gold.len(),
            found: predicted.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::EmptyInput("classification test set"));
    }
    let mut counts: BTreeMap<&L, (usize, usize, usize)> = BTreeMap::new();
    let mut correct = 0;
    for (p, g) in predicted.iter().zip(gold) {
        if p == g {
            correct += 1;
            counts.entry(p).or_default().0 += 1;
        } else {
            counts.entry(p).or_default().1 += 1;
            counts.entry(g).or_default().2 += 1;
        }
    }
    let f1_sum: f64 = counts
        .values()
        .map(|&(tp, fp, fn_)| {
            if tp == 0 {
                0.0
            } else {
                2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
            }
        })
        .sum();
    Ok(ClassificationScores {
        accuracy: correct as f64 / gold.len() as f64,
        macro_f1: f1_sum / counts.len() as f64,
    })
}

/// Fits a probe on the training means and scores it on the test means.
pub fn classify_probe<L: Ord + Clone>(
    train_means: &[Vec<f64>],
    train_labels: &[L],
    test_means: &[Vec<f64>],
    test_labels: &[L],
    cfg: &ProbeConfig,
) -> Result<ClassificationScores> {
    let probe = LinearProbe::fit(train_means, train_labels, cfg)?;
    let predicted = test_means.iter().map(|x| probe.predict(x)).collect::<Result<Vec<_>>>()?;
    accuracy_and_macro_f1(&predicted, test_labels)
}

/// Probe on store means; `labels` maps every train and test id to its class.
pub fn classify_stores(
    train: &EmbeddingStore,
    test: &EmbeddingStore,
    labels: &[(String, String)],
    cfg: &ProbeConfig,
) -> Result<ClassificationScores> {
    let by_id: BTreeMap<&str, &str> = labels.iter().map(|(i, l)| (i.as_str(), l.as_str())).collect();
    let split = |store: &EmbeddingStore| -> Result<(Vec<Vec<f64>>, Vec<String>)> {
        let mut xs = Vec::with_capacity(store.len());
        let mut ys = Vec::with_capacity(store.len());
        for r in store.records() {
            let label = by_id.get(r.id.as_str()).ok_or_else(|| Error::UnknownId(r.id.clone()))?;
            xs.push(r.embedding.mean().to_vec());
            ys.push((*label).to_owned());
        }
        Ok((xs, ys))
    };
    let (train_x, train_y) = split(train)?;
    let (test_x, test_y) = split(test)?;
    classify_probe(&train_x, &train_y, &test_x, &test_y, cfg)
}
