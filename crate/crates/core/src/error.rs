use std::io;

use thiserror::Error;

/// Errors produced by the `uec-core` library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate embedding: mean has zero norm")]
    DegenerateEmbedding,

    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),

    #[error("degenerate uncertainty: model {index} has non-positive cost {value}")]
    DegenerateUncertainty { index: usize, value: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("duplicate record id `{0}`")]
    DuplicateId(String),

    #[error("ensemble stores are not aligned: {0}")]
    MisalignedEnsemble(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("MAP fit did not converge after {iterations} iterations (gradient inf-norm {gradient_norm:e})")]
    FitFailure {
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("correlation is undefined: one input has zero rank variance")]
    UndefinedCorrelation,

    #[error("classifier training set contains a single class")]
    SingleClass,

    #[error("unknown record id `{0}`")]
    UnknownId(String),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: duplicate judgment for ({query}, {doc})")]
    DuplicateJudgment {
        path: String,
        line: usize,
        query: String,
        doc: String,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

/// Diagnostics for the binary UECS store format.
#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("bad magic {found:02x?}, expected \"UECS\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported store version {0} (this reader supports version 1)")]
    UnsupportedVersion(u32),

    #[error("store declares dimension 0")]
    ZeroDim,

    #[error("truncated store: needed {needed} more bytes at byte offset {offset}")]
    Truncated { offset: u64, needed: usize },

    #[error("trailing bytes after the last record at byte offset {offset}")]
    TrailingBytes { offset: u64 },

    #[error("invalid UTF-8 string at byte offset {offset}")]
    InvalidUtf8 { offset: u64 },

    #[error("record {record}: negative variance at byte offset {offset}")]
    NegativeVariance { record: u64, offset: u64 },

    #[error("record {record}: non-finite value at byte offset {offset}")]
    NonFinite { record: u64, offset: u64 },

    #[error("record {record}: empty id at byte offset {offset}")]
    EmptyId { record: u64, offset: u64 },

    #[error("record {record}: duplicate id `{id}`")]
    DuplicateId { record: u64, id: String },

    #[error("refusing to serialize: {0}")]
    SerializationRefused(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
