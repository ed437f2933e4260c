//! Per-domain mean ensemble coefficients.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::convolution::{coefficients_for, CoefficientConfig};
use crate::error::{Error, Result};
use crate::eval::synth::domain_of;
use crate::types::EnsembleInput;

/// Records whose id carries no domain prefix.
pub const OTHER_DOMAIN: &str = "other";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub domain: String,
    pub count: usize,
    pub mean_pi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientProfile {
    pub models: Vec<String>,
    /// Sorted by domain name.
    pub rows: Vec<ProfileRow>,
}

impl CoefficientProfile {
    /// `domain,count,<model>...` header followed by one row per domain.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("domain,count");
        for m in &self.models {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{}", r.domain, r.count);
            for p in &r.mean_pi {
                let _ = write!(out, ",{p}");
            }
            out.push('\n');
        }
        out
    }

    pub fn row(&self, domain: &str) -> Option<&ProfileRow> {
        self.rows.iter().find(|r| r.domain == domain)
    }
}

/// Mean per-record coefficients grouped by the domain prefix of each id.
pub fn coefficient_profile(queries: &EnsembleInput, cfg: &CoefficientConfig) -> Result<CoefficientProfile> {
    cfg.validate()?;
    if queries.is_empty() {
        return Err(Error::EmptyInput("coefficient profile needs at least one record"));
    }
    let k = queries.n_models();
    let mut sums: BTreeMap<&str, (usize, Vec<f64>)> = BTreeMap::new();
    for i in 0..queries.len() {
        let pi = coefficients_for(&queries.row(i), cfg)?;
        let domain = domain_of(queries.id(i)).unwrap_or(OTHER_DOMAIN);
        let (count, acc) = sums.entry(domain).or_insert_with(|| (0, vec![0.0; k]));
        *count += 1;
        for (a, p) in acc.iter_mut().zip(pi.pi()) {
            *a += p;
        }
    }
    Ok(CoefficientProfile {
        models: queries.stores().iter().map(|s| s.model_name().to_owned()).collect(),
        rows: sums
            .into_iter()
            .map(|(domain, (count, acc))| ProfileRow {
                domain: domain.to_owned(),
                count,
                mean_pi: acc.into_iter().map(|a| a / count as f64).collect(),
            })
            .collect(),
    })
}
