use std::collections::BTreeSet;
use std::fmt::Write;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

use super::decode::simulate;

/// Retained positions per sequence quartile; quartile `q` spans
/// `[q·T/4, (q+1)·T/4)` with integer division.
pub fn quartile_counts(retained: &[usize], seq_len: usize) -> [usize; 4] {
    let mut counts = [0; 4];
    for p in retained {
        let q = (0..4).rev().find(|q| *p >= q * seq_len / 4).unwrap_or(0);
        counts[q] += 1;
    }
    counts
}

fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    let a: BTreeSet<_> = a.iter().collect();
    let b: BTreeSet<_> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        1.0
    } else {
        a.intersection(&b).count() as f64 / union as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub policy: String,
    pub zones: String,
    pub cache_size: usize,
    /// Mean Jaccard overlap with the first config's retained sets.
    pub overlap: f64,
    /// Mean retained count per quartile, over heads, layers and seeds.
    pub quartiles: [f64; 4],
    pub mean_nll: Option<f64>,
}

fn same_stream(a: &RunConfig, b: &RunConfig) -> bool {
    (a.seed, a.seq_len, a.dims(), &a.tokens, &a.weights) == (b.seed, b.seq_len, b.dims(), &b.tokens, &b.weights)
}

/// Runs every config over `seeds` consecutive seeds starting at the shared
/// seed. The first config is the overlap reference; put `full` first to
/// measure overlap with full attention.
pub fn run_compare(configs: &[RunConfig], seeds: usize) -> Result<Vec<CompareRow>> {
    if configs.len() < 2 {
        return Err(CliError::Config("compare needs at least two configs".into()));
    }
    if seeds == 0 {
        return Err(CliError::Config("seeds must be at least 1".into()));
    }
    if let Some(bad) = configs.iter().find(|c| !same_stream(c, &configs[0])) {
        return Err(CliError::Input(format!(
            "config for policy {} uses a different model or token stream",
            bad.policy
        )));
    }
    let mut overlap = vec![0.0; configs.len()];
    let mut quartiles = vec![[0.0; 4]; configs.len()];
    let mut nll: Vec<Option<f64>> = vec![None; configs.len()];
    let mut samples = 0usize;
    for s in 0..seeds as u64 {
        let outcomes = configs
            .iter()
            .map(|c| simulate(&RunConfig { seed: c.seed + s, ..c.clone() }))
            .collect::<Result<Vec<_>>>()?;
        let reference = &outcomes[0].retained;
        for (i, o) in outcomes.iter().enumerate() {
            for (r, base) in o.retained.iter().zip(reference) {
                overlap[i] += jaccard(r, base);
                for (q, c) in quartile_counts(r, configs[i].seq_len).iter().enumerate() {
                    quartiles[i][q] += *c as f64;
                }
            }
            if let Some(m) = o.mean_nll() {
                *nll[i].get_or_insert(0.0) += m;
            }
        }
        samples += reference.len();
    }
    Ok(configs
        .iter()
        .enumerate()
        .map(|(i, c)| CompareRow {
            policy: c.policy.clone(),
            zones: c.zones.clone(),
            cache_size: c.cache_size,
            overlap: overlap[i] / samples as f64,
            quartiles: quartiles[i].map(|q| q / samples as f64),
            mean_nll: nll[i].map(|n| n / seeds as f64),
        })
        .collect())
}

pub fn render(rows: &[CompareRow]) -> String {
    let mut out = String::from("policy,zones,cache_size,overlap,q1,q2,q3,q4,mean_nll\n");
    for r in rows {
        let [q1, q2, q3, q4] = r.quartiles;
        let nll = r.mean_nll.map(|n| n.to_string()).unwrap_or_default();
        writeln!(out, "{},\"{}\",{},{},{q1},{q2},{q3},{q4},{nll}", r.policy, r.zones, r.cache_size, r.overlap)
            .unwrap();
    }
    out
}
