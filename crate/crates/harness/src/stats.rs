use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::csvio::CsvRow;

/// Normal quantile used for the 99% confidence half-width.
pub const Z_99: f64 = 2.33;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("a confidence interval needs at least 2 samples, got {0}")]
pub struct TooFewSamples(pub usize);

/// Mean and half-width `2.33 * s / sqrt(n)` with the sample standard
/// deviation `s`.
pub fn confidence_interval(samples: &[f64]) -> Result<(f64, f64), TooFewSamples> {
    let n = samples.len();
    if n < 2 {
        return Err(TooFewSamples(n));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let ss: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
    let std = (ss / (n - 1) as f64).sqrt();
    Ok((mean, Z_99 * std / (n as f64).sqrt()))
}

/// Mean per-episode query ratio keyed by (environment, eps_t, pg).
pub fn query_ratio_means(rows: &[CsvRow], variant: &str) -> BTreeMap<(String, u64, u8), f64> {
    let mut acc: BTreeMap<(String, u64, u8), (f64, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.variant == variant) {
        let e = acc
            .entry((r.env.clone(), r.eps_t.to_bits(), r.pg))
            .or_insert((0.0, 0));
        e.0 += r.query_ratio;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect()
}

/// Query-ratio table: one line per environment, one column per
/// (eps_t, pg) pair, two decimals.
pub fn query_stats_report(rows: &[CsvRow], variant: &str) -> String {
    let means = query_ratio_means(rows, variant);
    let mut columns: Vec<(u64, u8)> = means.keys().map(|k| (k.1, k.2)).collect();
    columns.sort_by(|a, b| {
        f64::from_bits(a.0)
            .total_cmp(&f64::from_bits(b.0))
            .then(a.1.cmp(&b.1))
    });
    columns.dedup();
    let mut envs: Vec<&String> = means.keys().map(|k| &k.0).collect();
    envs.dedup();
    let width = envs.iter().map(|e| e.len()).max().unwrap_or(3).max(3);
    let mut out = format!("{:<width$}", "env");
    for (eps_t, pg) in &columns {
        let _ = write!(out, " | eps_t={} pg={}", f64::from_bits(*eps_t), pg);
    }
    out.push('\n');
    for env in envs {
        let _ = write!(out, "{env:<width$}");
        for &(eps_t, pg) in &columns {
            let label_len = format!(" | eps_t={} pg={}", f64::from_bits(eps_t), pg).len() - 3;
            match means.get(&(env.clone(), eps_t, pg)) {
                Some(m) => {
                    let _ = write!(out, " | {m:>label_len$.2}");
                }
                None => {
                    let _ = write!(out, " | {:>label_len$}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Mean return with confidence half-width per cell.
pub fn return_report(rows: &[CsvRow]) -> String {
    let mut cells: BTreeMap<usize, (String, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let label = format!(
            "{} {} alpha={} eps_a={} eps_t={} p_abs={} pg={} {} C={} budget={}",
            r.env, r.variant, r.alpha, r.eps_a, r.eps_t, r.p_abs, r.pg, r.policy, r.c, r.budget
        );
        cells
            .entry(r.cell_id)
            .or_insert((label, Vec::new()))
            .1
            .push(r.total_return);
    }
    let mut out = String::new();
    for (id, (label, returns)) in cells {
        match confidence_interval(&returns) {
            Ok((mean, hw)) => {
                let _ = writeln!(
                    out,
                    "{id:>5}  {mean:>10.4} +- {hw:<8.4} n={:<6} {label}",
                    returns.len()
                );
            }
            Err(_) => {
                let _ = writeln!(
                    out,
                    "{id:>5}  {:>10.4} +- {:<8} n={:<6} {label}",
                    returns[0], "-", 1
                );
            }
        }
    }
    out
}
