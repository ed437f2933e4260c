//! Retrieval dataset directories and coefficient tables.
//!
//! A dataset directory holds one `docs.<model>.uecs` and one
//! `queries.<model>.uecs` per model plus `qrels.tsv`. Models are ordered by
//! file name.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::convolution::Coefficients;
use crate::error::{Error, Result};
use crate::eval::pipeline::RetrievalData;
use crate::io::store::{read_store, write_store};
use crate::io::tsv::{read_qrels, write_qrels};
use crate::types::{EnsembleInput, EmbeddingStore};

pub const QRELS_FILE: &str = "qrels.tsv";

pub fn docs_file(model: &str) -> String {
    format!("docs.{model}.uecs")
}

pub fn queries_file(model: &str) -> String {
    format!("queries.{model}.uecs")
}

/// Writes every model's stores and the qrels under `dir`, creating it.
pub fn write_dataset(data: &RetrievalData, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for (docs, queries) in data.docs.stores().iter().zip(data.queries.stores()) {
        if docs.model_name() != queries.model_name() {
            return Err(Error::MisalignedEnsemble(format!(
                "doc store `{}` is paired with query store `{}`",
                docs.model_name(),
                queries.model_name()
            )));
        }
        write_store(docs, dir.join(docs_file(docs.model_name())))?;
        write_store(queries, dir.join(queries_file(queries.model_name())))?;
    }
    write_qrels(&data.qrels, dir.join(QRELS_FILE))
}

/// Model tags found as `docs.<tag>.uecs`, sorted.
pub fn dataset_models(dir: impl AsRef<Path>) -> Result<Vec<String>> {
    let mut tags = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(tag) = name.strip_prefix("docs.").and_then(|n| n.strip_suffix(".uecs")) {
            if !tag.is_empty() {
                tags.push(tag.to_owned());
            }
        }
    }
    tags.sort();
    Ok(tags)
}

pub fn read_dataset(dir: impl AsRef<Path>) -> Result<RetrievalData> {
    let dir = dir.as_ref();
    let models = dataset_models(dir)?;
    if models.is_empty() {
        return Err(Error::EmptyInput("dataset directory has no docs.<model>.uecs stores"));
    }
    let mut docs = Vec::with_capacity(models.len());
    let mut queries = Vec::with_capacity(models.len());
    for m in &models {
        docs.push(read_store(dir.join(docs_file(m)))?);
        queries.push(read_store(dir.join(queries_file(m)))?);
    }
    let qrels = read_qrels(dir.join(QRELS_FILE))?;
    RetrievalData::new(EnsembleInput::new(docs)?, EnsembleInput::new(queries)?, qrels)
}

/// `id,<model>,…` with one row of coefficients per record.
pub fn format_coefficients(input: &EnsembleInput, coefficients: &[Coefficients]) -> Result<String> {
    if coefficients.len() != input.len() {
        return Err(Error::DimensionMismatch {
            expected: input.len(),
            found: coefficients.len(),
        });
    }
    let mut out = String::from("id");
    for s in input.stores() {
        out.push(',');
        out.push_str(s.model_name());
    }
    out.push('\n');
    for (i, pi) in coefficients.iter().enumerate() {
        out.push_str(input.id(i));
        for p in pi.pi() {
            let _ = write!(out, ",{p}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Reads several stores and aligns them on the first one's ids.
pub fn read_ensemble<P: AsRef<Path>>(paths: &[P]) -> Result<EnsembleInput> {
    let stores = paths.iter().map(read_store).collect::<Result<Vec<EmbeddingStore>>>()?;
    EnsembleInput::new(stores)
}
