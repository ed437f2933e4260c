//! Tab-separated qrels, runs, training pairs and labels.
//!
//! Lines may end in LF or CRLF; blank lines are ignored. Every malformed line
//! is reported with its 1-based line number.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::metrics::Qrels;
use crate::io::store::write_atomic;
use crate::retrieval::{Hit, QueryResult, RunRanking};

fn parse_error(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_owned(),
        line,
        message: message.into(),
    }
}

/// Splits `text` into `(line_number, fields)`, requiring exactly `n` fields.
fn records<'a>(text: &'a str, path: &'a str, n: usize) -> impl Iterator<Item = Result<(usize, Vec<&'a str>)>> + 'a {
    text.split('\n').enumerate().filter_map(move |(i, raw)| {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            return None;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != n {
            return Some(Err(parse_error(
                path,
                i + 1,
                format!("expected {n} tab-separated fields, found {}", fields.len()),
            )));
        }
        if let Some(pos) = fields.iter().position(|f| f.is_empty()) {
            return Some(Err(parse_error(path, i + 1, format!("field {} is empty", pos + 1))));
        }
        Some(Ok((i + 1, fields)))
    })
}

fn field<T: FromStr>(value: &str, path: &str, line: usize, what: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| parse_error(path, line, format!("invalid {what} `{value}`")))
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    String::from_utf8(bytes).map_err(|e| {
        let line = 1 + e.as_bytes()[..e.utf8_error().valid_up_to()].iter().filter(|b| **b == b'\n').count();
        parse_error(&path.display().to_string(), line, "invalid UTF-8")
    })
}

/// `query_id \t doc_id \t grade`.
pub fn parse_qrels(text: &str, path: &str) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for rec in records(text, path, 3) {
        let (line, f) = rec?;
        let grade: u32 = field(f[2], path, line, "grade")?;
        if !qrels.insert(f[0], f[1], grade) {
            return Err(Error::DuplicateJudgment {
                path: path.to_owned(),
                line,
                query: f[0].to_owned(),
                doc: f[1].to_owned(),
            });
        }
    }
    Ok(qrels)
}

pub fn read_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    let path = path.as_ref();
    parse_qrels(&read_text(path)?, &path.display().to_string())
}

pub fn format_qrels(qrels: &Qrels) -> String {
    let mut out = String::new();
    for (q, docs) in qrels.iter() {
        for (d, g) in docs {
            let _ = writeln!(out, "{q}\t{d}\t{g}");
        }
    }
    out
}

pub fn write_qrels(qrels: &Qrels, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), format_qrels(qrels).as_bytes())
}

/// `query_id \t doc_id \t rank \t score`, rank 1-based, in result order.
pub fn format_run(results: &[QueryResult]) -> String {
    let mut out = String::new();
    for r in results {
        for (i, h) in r.hits.iter().enumerate() {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", r.query_id, h.doc_id, i + 1, h.score);
        }
    }
    out
}

pub fn write_run(results: &[QueryResult], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), format_run(results).as_bytes())
}

/// Parses a run; each query's hits are ordered by their rank field, which
/// must be unique per query.
pub fn parse_run(text: &str, path: &str) -> Result<RunRanking> {
    let mut per_query: Vec<(String, Vec<(usize, Hit)>)> = Vec::new();
    let mut ranks = HashSet::new();
    let mut docs = HashSet::new();
    for rec in records(text, path, 4) {
        let (line, f) = rec?;
        let rank: usize = field(f[2], path, line, "rank")?;
        if rank == 0 {
            return Err(parse_error(path, line, "rank must be at least 1"));
        }
        let score: f64 = field(f[3], path, line, "score")?;
        if score.is_nan() {
            return Err(parse_error(path, line, "score is NaN"));
        }
        if !ranks.insert((f[0], rank)) {
            return Err(parse_error(path, line, format!("duplicate rank {rank} for query `{}`", f[0])));
        }
        if !docs.insert((f[0], f[1])) {
            return Err(parse_error(path, line, format!("doc `{}` listed twice for query `{}`", f[1], f[0])));
        }
        let hit = Hit {
            doc_id: f[1].to_owned(),
            score,
        };
        match per_query.iter_mut().find(|(q, _)| q == f[0]) {
            Some((_, hits)) => hits.push((rank, hit)),
            None => per_query.push((f[0].to_owned(), vec![(rank, hit)])),
        }
    }
    let mut run = RunRanking::new();
    for (q, mut hits) in per_query {
        hits.sort_by_key(|(rank, _)| *rank);
        run.insert(q, hits.into_iter().map(|(_, h)| h).collect());
    }
    Ok(run)
}

pub fn read_run(path: impl AsRef<Path>) -> Result<RunRanking> {
    let path = path.as_ref();
    parse_run(&read_text(path)?, &path.display().to_string())
}

/// One labeled (query, passage) pair for fitting the Laplace head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPair {
    pub query_id: String,
    pub doc_id: String,
    pub relevant: bool,
}

/// `query_id \t doc_id \t label` with label `0` or `1`.
pub fn parse_pairs(text: &str, path: &str) -> Result<Vec<LabeledPair>> {
    records(text, path, 3)
        .map(|rec| {
            let (line, f) = rec?;
            let relevant = match f[2] {
                "1" => true,
                "0" => false,
                other => return Err(parse_error(path, line, format!("label must be 0 or 1, got `{other}`"))),
            };
            Ok(LabeledPair {
                query_id: f[0].to_owned(),
                doc_id: f[1].to_owned(),
                relevant,
            })
        })
        .collect()
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<LabeledPair>> {
    let path = path.as_ref();
    parse_pairs(&read_text(path)?, &path.display().to_string())
}

pub fn format_pairs(pairs: &[LabeledPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        let _ = writeln!(out, "{}\t{}\t{}", p.query_id, p.doc_id, u8::from(p.relevant));
    }
    out
}

/// `id_a \t id_b \t score` gold similarity for correlation tasks.
pub fn parse_scored_pairs(text: &str, path: &str) -> Result<Vec<(String, String, f64)>> {
    records(text, path, 3)
        .map(|rec| {
            let (line, f) = rec?;
            let score: f64 = field(f[2], path, line, "score")?;
            if !score.is_finite() {
                return Err(parse_error(path, line, "score must be finite"));
            }
            Ok((f[0].to_owned(), f[1].to_owned(), score))
        })
        .collect()
}

pub fn read_scored_pairs(path: impl AsRef<Path>) -> Result<Vec<(String, String, f64)>> {
    let path = path.as_ref();
    parse_scored_pairs(&read_text(path)?, &path.display().to_string())
}

/// `id \t label`; ids must be unique.
pub fn parse_labels(text: &str, path: &str) -> Result<Vec<(String, String)>> {
    let mut seen = HashSet::new();
    records(text, path, 2)
        .map(|rec| {
            let (line, f) = rec?;
            if !seen.insert(f[0]) {
                return Err(parse_error(path, line, format!("duplicate id `{}`", f[0])));
            }
            Ok((f[0].to_owned(), f[1].to_owned()))
        })
        .collect()
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    parse_labels(&read_text(path)?, &path.display().to_string())
}

/// Writes text through a synced temporary file.
pub fn write_text(text: &str, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), text.as_bytes())
}
