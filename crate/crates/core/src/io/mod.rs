//! Persistence: UECS stores, TSV judgments/runs/pairs, JSON documents.

pub mod dataset;
pub mod store;
pub mod tsv;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::Result;

pub use dataset::{format_coefficients, read_dataset, read_ensemble, write_dataset};
pub use store::{decode_store, encode_store, read_store, read_store_from, write_store, write_store_to};
pub use tsv::{
    format_run, parse_qrels, parse_run, read_labels, read_pairs, read_qrels, read_run, read_scored_pairs,
    write_qrels, write_run, write_text, LabeledPair,
};

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Pretty-printed JSON with a trailing newline, written atomically.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    store::write_atomic(path.as_ref(), text.as_bytes())
}
