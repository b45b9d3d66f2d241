//! Result records and the files derived from them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use modelcheck::stats::ks_distance_uniform;
use serde::{Deserialize, Serialize};

use crate::config::Method;
use crate::error::{io, Result};

pub const HIST_BINS: usize = 10;

/// One row of `results.csv`. A failed replication keeps its identifying
/// fields, leaves the numbers empty and carries the message in `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub replication: usize,
    pub method: String,
    /// Q for Ljung-Box, z for the noise test, the weighted observed surprisal for ITMC.
    pub statistic: Option<f64>,
    /// ρ★ for ITMC, the test p-value otherwise.
    pub p_value: Option<f64>,
    pub dispersion: Option<f64>,
    pub seed: u64,
    /// Seconds; empty unless timing was requested.
    pub wall_time: Option<f64>,
    pub error: Option<String>,
}

impl ResultRecord {
    /// A record with every value empty.
    pub fn new(experiment: &str, replication: usize, method: Method, seed: u64) -> Self {
        Self {
            experiment: experiment.to_string(),
            replication,
            method: method.name().to_string(),
            statistic: None,
            p_value: None,
            dispersion: None,
            seed,
            wall_time: None,
            error: None,
        }
    }

    pub fn failed(experiment: &str, replication: usize, method: Method, seed: u64, err: impl ToString) -> Self {
        Self { error: Some(err.to_string()), ..Self::new(experiment, replication, method, seed) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub count: usize,
    pub errors: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub frac_below_0_05: Option<f64>,
    pub ks_uniform: Option<f64>,
}

/// Counts of `values` in `HIST_BINS` equal bins on [0, 1]; 1 falls in the last bin.
pub fn histogram(values: &[f64]) -> [usize; HIST_BINS] {
    let mut counts = [0; HIST_BINS];
    for &v in values.iter().filter(|v| (0.0..=1.0).contains(*v)) {
        counts[((v * HIST_BINS as f64) as usize).min(HIST_BINS - 1)] += 1;
    }
    counts
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn summarize(values: &[f64], errors: usize) -> MethodSummary {
    let n = values.len();
    let (mean, frac) = if n == 0 {
        (None, None)
    } else {
        let below = values.iter().filter(|&&v| v < 0.05).count();
        (Some(values.iter().sum::<f64>() / n as f64), Some(below as f64 / n as f64))
    };
    MethodSummary {
        count: n,
        errors,
        mean,
        median: median(values),
        frac_below_0_05: frac,
        ks_uniform: ks_distance_uniform(values).ok(),
    }
}

/// p-values per method, in record order, and the per-method error counts.
pub fn group_by_method(records: &[ResultRecord]) -> BTreeMap<String, (Vec<f64>, usize)> {
    let mut out: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    for r in records {
        let entry = out.entry(r.method.clone()).or_default();
        match r.p_value {
            Some(p) if r.error.is_none() => entry.0.push(p),
            _ => entry.1 += 1,
        }
    }
    out
}

/// Files written by [`write_result_set`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResultFiles {
    pub results: PathBuf,
    pub histograms: Vec<PathBuf>,
    pub summary: PathBuf,
}

/// Write `results.csv`, one `hist_<method>.csv` per method and `summary.json`.
pub fn write_result_set(dir: &Path, records: &[ResultRecord]) -> Result<ResultFiles> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let results = dir.join("results.csv");
    let mut w = csv::Writer::from_path(&results)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(io(&results))?;

    let groups = group_by_method(records);
    let mut histograms = Vec::new();
    let mut summary = BTreeMap::new();
    for (method, (values, errors)) in &groups {
        let path = dir.join(format!("hist_{method}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["bin_left", "count"])?;
        for (i, c) in histogram(values).iter().enumerate() {
            w.write_record([(i as f64 / HIST_BINS as f64).to_string(), c.to_string()])?;
        }
        w.flush().map_err(io(&path))?;
        histograms.push(path);
        summary.insert(method.clone(), summarize(values, *errors));
    }

    let summary_path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(&summary_path, text).map_err(io(&summary_path))?;
    Ok(ResultFiles { results, histograms, summary: summary_path })
}
