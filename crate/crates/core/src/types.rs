//! Gaussian embeddings, embedding stores and multi-model ensembles.
//!
//! A [`GaussianEmbedding`] is a mean vector with a diagonal covariance. A
//! deterministic embedding is the special case `var = 0`. Everything is held
//! in `f64`; the on-disk store format narrows to `f32`.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// A diagonal-covariance Gaussian over embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEmbedding {
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl GaussianEmbedding {
    /// Builds an embedding, validating length, finiteness and `var >= 0`.
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::InvalidEmbedding("dimension must be at least 1".into()));
        }
        if mean.len() != var.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                found: var.len(),
            });
        }
        if let Some(d) = mean.iter().position(|m| !m.is_finite()) {
            return Err(Error::InvalidEmbedding(format!("non-finite mean at dimension {d}")));
        }
        if let Some(d) = var.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidEmbedding(format!(
                "variance at dimension {d} is {} (must be finite and >= 0)",
                var[d]
            )));
        }
        Ok(Self { mean, var })
    }

    /// A point mass at `mean`.
    pub fn deterministic(mean: Vec<f64>) -> Result<Self> {
        let var = vec![0.0; mean.len()];
        Self::new(mean, var)
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.mean, self.var)
    }

    /// `tr(Σ)`, the sum of the per-dimension variances.
    pub fn trace(&self) -> f64 {
        self.var.iter().sum()
    }

    /// `‖μ‖²`.
    pub fn mean_sq_norm(&self) -> f64 {
        dot(&self.mean, &self.mean)
    }

    /// Rescales to a unit-norm mean.
    ///
    /// The map `z ↦ z / ‖μ‖` is applied with `‖μ‖` held constant, so the
    /// variance is divided by `‖μ‖²`.
    pub fn l2_normalize(&self) -> Result<Self> {
        let sq = self.mean_sq_norm();
        let norm = sq.sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateEmbedding);
        }
        Ok(Self {
            mean: self.mean.iter().map(|m| m / norm).collect(),
            var: self.var.iter().map(|v| v / sq).collect(),
        })
    }
}

/// Free-function form of [`GaussianEmbedding::l2_normalize`].
pub fn l2_normalize(e: &GaussianEmbedding) -> Result<GaussianEmbedding> {
    e.l2_normalize()
}

/// Free-function form of [`GaussianEmbedding::trace`].
pub fn trace(e: &GaussianEmbedding) -> f64 {
    e.trace()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// An addressable embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub embedding: GaussianEmbedding,
}

impl EmbeddingRecord {
    pub fn new(id: impl Into<String>, embedding: GaussianEmbedding) -> Self {
        Self {
            id: id.into(),
            embedding,
        }
    }
}

/// The embeddings one model produced for a corpus, in canonical order.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    model_name: String,
    dim: usize,
    records: Vec<EmbeddingRecord>,
    by_id: HashMap<String, usize>,
}

impl PartialEq for EmbeddingStore {
    fn eq(&self, other: &Self) -> bool {
        self.model_name == other.model_name && self.dim == other.dim && self.records == other.records
    }
}

impl EmbeddingStore {
    /// Creates an empty store of dimension `dim`.
    pub fn new(model_name: impl Into<String>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidEmbedding("store dimension must be at least 1".into()));
        }
        Ok(Self {
            model_name: model_name.into(),
            dim,
            records: Vec::new(),
            by_id: HashMap::new(),
        })
    }

    pub fn from_records(
        model_name: impl Into<String>,
        dim: usize,
        records: impl IntoIterator<Item = EmbeddingRecord>,
    ) -> Result<Self> {
        let mut store = Self::new(model_name, dim)?;
        for r in records {
            store.push(r)?;
        }
        Ok(store)
    }

    pub fn push(&mut self, record: EmbeddingRecord) -> Result<()> {
        if record.id.is_empty() {
            return Err(Error::InvalidEmbedding("record id must be nonempty".into()));
        }
        check_dim(self.dim, record.embedding.dim())?;
        if self.by_id.contains_key(&record.id) {
            return Err(Error::DuplicateId(record.id));
        }
        self.by_id.insert(record.id.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&GaussianEmbedding> {
        self.by_id.get(id).map(|&i| &self.records[i].embedding)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    pub fn into_records(self) -> Vec<EmbeddingRecord> {
        self.records
    }
}

/// `K` stores describing the same records, aligned on id.
///
/// All stores are reordered to follow the first store's record order, so row
/// `i` of every store refers to the same input.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleInput {
    stores: Vec<EmbeddingStore>,
}

impl EnsembleInput {
    pub fn new(stores: Vec<EmbeddingStore>) -> Result<Self> {
        let Some(first) = stores.first() else {
            return Err(Error::EmptyInput("an ensemble needs at least one store"));
        };
        let dim = first.dim();
        let order: Vec<String> = first.ids().map(str::to_owned).collect();
        let mut aligned = Vec::with_capacity(stores.len());
        for (k, store) in stores.iter().enumerate() {
            check_dim(dim, store.dim())?;
            if store.len() != order.len() {
                return Err(Error::MisalignedEnsemble(format!(
                    "store {k} (`{}`) has {} records, store 0 has {}",
                    store.model_name(),
                    store.len(),
                    order.len()
                )));
            }
            let mut reordered = EmbeddingStore::new(store.model_name(), dim)?;
            for id in &order {
                let e = store.get(id).ok_or_else(|| {
                    Error::MisalignedEnsemble(format!(
                        "store {k} (`{}`) is missing id `{id}`",
                        store.model_name()
                    ))
                })?;
                reordered.push(EmbeddingRecord::new(id.clone(), e.clone()))?;
            }
            aligned.push(reordered);
        }
        Ok(Self { stores: aligned })
    }

    pub fn stores(&self) -> &[EmbeddingStore] {
        &self.stores
    }

    pub fn n_models(&self) -> usize {
        self.stores.len()
    }

    pub fn dim(&self) -> usize {
        self.stores[0].dim()
    }

    pub fn len(&self) -> usize {
        self.stores[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.stores[0].ids()
    }

    /// The `K` embeddings of row `i`.
    pub fn row(&self, i: usize) -> Vec<&GaussianEmbedding> {
        self.stores.iter().map(|s| &s.records()[i].embedding).collect()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.stores[0].records()[i].id
    }
}
