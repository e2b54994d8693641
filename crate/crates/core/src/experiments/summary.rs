use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::normal_quantile;

/// Summary of one quantity across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub name: String,
    pub n: usize,
    pub mean: f64,
    /// Population variance (divides by `n`).
    pub variance: f64,
    pub mse: Option<f64>,
    pub coverage: Option<f64>,
    pub min: f64,
    pub max: f64,
}

impl Cell {
    /// Summarizes `samples`; `truth` enables the mean squared error. Samples
    /// are sorted first so the result does not depend on their order.
    pub fn from_samples(name: impl Into<String>, samples: &[f64], truth: Option<f64>) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let samples = &sorted[..];
        let n = samples.len();
        let nf = n as f64;
        let mean = if n == 0 { f64::NAN } else { samples.iter().sum::<f64>() / nf };
        let variance = if n == 0 {
            f64::NAN
        } else {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf
        };
        let mse = truth.map(|a| samples.iter().map(|x| (x - a).powi(2)).sum::<f64>() / nf);
        Self {
            name: name.into(),
            n,
            mean,
            variance,
            mse,
            coverage: None,
            min: samples.iter().copied().fold(f64::INFINITY, f64::min),
            max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn with_coverage(mut self, hits: usize, total: usize) -> Self {
        self.coverage = (total > 0).then(|| hits as f64 / total as f64);
        self
    }
}

/// Aggregated output of a replication run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SummaryStats {
    pub label: String,
    pub analysis: String,
    pub horizon: usize,
    pub replications: usize,
    pub failures: usize,
    pub failure_examples: Vec<String>,
    pub cells: Vec<Cell>,
    /// Proportions such as rejection rates and containment frequencies.
    pub rates: BTreeMap<String, f64>,
    /// Counts of categorical outcomes, e.g. which interval a stage selected.
    pub tallies: BTreeMap<String, BTreeMap<String, usize>>,
    /// Standardized pivots per interval, for QQ diagnostics.
    pub pivots: Vec<Vec<f64>>,
}

impl SummaryStats {
    pub fn cell(&self, name: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.name == name)
    }

    pub fn rate(&self, name: &str) -> Option<f64> {
        self.rates.get(name).copied()
    }

    pub(crate) fn tally(&mut self, table: &str, key: impl Into<String>) {
        *self
            .tallies
            .entry(table.to_string())
            .or_default()
            .entry(key.into())
            .or_insert(0) += 1;
    }
}

/// Smallest sample accepted by [`emit_qq`].
pub const QQ_MIN_SAMPLES: usize = 20;

/// Pairs `(Φ⁻¹((i - 0.5) / n), x_(i))` of theoretical and sorted empirical
/// quantiles.
pub fn emit_qq(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.len() < QQ_MIN_SAMPLES {
        return Err(Error::Capacity(format!(
            "QQ pairs need at least {QQ_MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, x)| Ok((normal_quantile((i as f64 + 0.5) / n)?, x)))
        .collect()
}
