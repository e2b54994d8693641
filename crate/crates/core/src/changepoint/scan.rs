use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{solve_a, EstimateResult, SolverConfig};
use crate::process::Trace;
use crate::stats::chi2_1_quantile;

/// Shortest interval on which the offset is estimated.
pub const MIN_INTERVAL: usize = 100;

/// Squared standardized difference of two interval estimates; chi-square(1)
/// when both intervals share the same offset.
pub fn pair_test(e1: &EstimateResult, e2: &EstimateResult) -> Result<f64> {
    for e in [e1, e2] {
        if !e.is_converged() {
            return Err(Error::Degenerate(format!(
                "estimate on ({}, {}] did not converge ({:?})",
                e.t0, e.t1, e.status
            )));
        }
    }
    let denom = e1.variance() + e2.variance();
    if !(denom.is_finite() && denom > 0.0) {
        return Err(Error::Degenerate(format!("variance sum {denom} is not positive")));
    }
    Ok((e2.a_hat - e1.a_hat).powi(2) / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMethod {
    /// Local maxima above `c_T`.
    Threshold,
    /// Local maxima above the chi-square(1) quantile at `1 - 0.01 / k`.
    ChiSquare,
    /// Position of the largest ratio between consecutive sorted maxima.
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub k: usize,
    pub solver: SolverConfig,
    /// Threshold `c_T`; `None` means `sqrt(T)`.
    pub c_t: Option<f64>,
    /// Family-wise level spread over the `k` intervals by the chi-square method.
    pub chi_alpha: f64,
    pub min_interval: usize,
    /// The ratio method only compares the `ratio_depth` largest local maxima;
    /// 0 compares all of them. Tiny maxima in a long null tail otherwise
    /// produce arbitrarily large ratios.
    pub ratio_depth: usize,
}

impl ScanConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            solver: SolverConfig::default(),
            c_t: None,
            chi_alpha: 0.01,
            min_interval: MIN_INTERVAL,
            ratio_depth: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub threshold: usize,
    pub chi_square: usize,
    pub ratio: usize,
}

impl Counts {
    pub fn get(&self, method: CountMethod) -> usize {
        match method {
            CountMethod::Threshold => self.threshold,
            CountMethod::ChiSquare => self.chi_square,
            CountMethod::Ratio => self.ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub k: usize,
    /// Cut times `s_0 = 0 < s_1 < ... < s_k = T`; interval `i` is `(s_{i-1}, s_i]`.
    pub boundaries: Vec<usize>,
    pub estimates: Vec<EstimateResult>,
    /// `l[i - 2]` is `L_i` for `2 <= i <= k - 1`.
    pub l: Vec<f64>,
    /// 1-based interval indices of the local maxima of `L_i`.
    pub local_max_indices: Vec<usize>,
    pub c_t: f64,
    pub chi_threshold: f64,
    pub counts: Counts,
}

impl ScanResult {
    pub fn l_at(&self, i: usize) -> f64 {
        self.l[i - 2]
    }

    /// Local maxima as `(i, L_i)`, largest first; ties keep the smaller index first.
    pub fn sorted_local_maxima(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = self
            .local_max_indices
            .iter()
            .map(|&i| (i, self.l_at(i)))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }

    /// Indices of the `n` largest local maxima, in decreasing order of `L_i`.
    pub fn top_local_maxima(&self, n: usize) -> Vec<usize> {
        self.sorted_local_maxima().into_iter().take(n).map(|p| p.0).collect()
    }
}

/// Equally spaced integer cuts of `[lo, hi]` into `k` pieces.
pub fn cuts(lo: usize, hi: usize, k: usize) -> Vec<usize> {
    let len = (hi - lo) as f64;
    (0..=k)
        .map(|i| lo + (len * i as f64 / k as f64).round() as usize)
        .collect()
}

/// Local maxima of `values`, where `values[j]` belongs to index `first + j`.
///
/// An entry qualifies when it is strictly above its left neighbour and at
/// least its right neighbour; missing neighbours at the ends are ignored.
/// On a plateau this picks the smallest index.
pub fn local_maxima(values: &[f64], first: usize) -> Vec<usize> {
    let n = values.len();
    (0..n)
        .filter(|&j| {
            let left = j == 0 || values[j] > values[j - 1];
            let right = j + 1 == n || values[j] >= values[j + 1];
            left && right
        })
        .map(|j| j + first)
        .collect()
}

/// Number of change points by the ratio of consecutive sorted local maxima.
pub fn ratio_count(sorted_desc: &[f64]) -> usize {
    if sorted_desc.len() < 2 {
        return sorted_desc.len();
    }
    let mut best = 1;
    let mut best_ratio = f64::NEG_INFINITY;
    for i in 0..sorted_desc.len() - 1 {
        let r = if sorted_desc[i + 1] > 0.0 {
            sorted_desc[i] / sorted_desc[i + 1]
        } else {
            f64::INFINITY
        };
        if r > best_ratio {
            best_ratio = r;
            best = i + 1;
        }
    }
    best
}

/// Splits `(0, T]` into `k` equal intervals, estimates the offset on each and
/// computes `L_i` from the estimates on intervals `i - 1` and `i + 1`.
pub fn scan(trace: &Trace, cfg: &ScanConfig) -> Result<ScanResult> {
    let k = cfg.k;
    let horizon = trace.horizon();
    if k < 4 {
        return Err(Error::Config(format!("scan needs k >= 4, got {k}")));
    }
    if horizon / k < cfg.min_interval {
        return Err(Error::Capacity(format!(
            "intervals of length {} are shorter than {}",
            horizon / k,
            cfg.min_interval
        )));
    }
    let boundaries = cuts(0, horizon, k);
    let estimates: Vec<EstimateResult> = (1..=k)
        .into_par_iter()
        .map(|i| {
            let est = solve_a(trace, boundaries[i - 1], boundaries[i], &cfg.solver)
                .map_err(|e| e.in_interval(i))?;
            if !est.is_converged() {
                return Err(Error::Degenerate(format!("estimate status {:?}", est.status)).in_interval(i));
            }
            Ok(est)
        })
        .collect::<Result<_>>()?;
    let l = (2..k)
        .map(|i| pair_test(&estimates[i - 2], &estimates[i]).map_err(|e| e.in_interval(i)))
        .collect::<Result<Vec<f64>>>()?;
    let local_max_indices = local_maxima(&l, 2);
    let c_t = cfg.c_t.unwrap_or((horizon as f64).sqrt());
    let chi_threshold = chi2_1_quantile(1.0 - cfg.chi_alpha / k as f64)?;
    let maxima: Vec<f64> = local_max_indices.iter().map(|&i| l[i - 2]).collect();
    let mut sorted = maxima.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let counts = Counts {
        threshold: maxima.iter().filter(|&&v| v > c_t).count(),
        chi_square: maxima.iter().filter(|&&v| v > chi_threshold).count(),
        ratio: ratio_count(match cfg.ratio_depth {
            0 => &sorted,
            d => &sorted[..d.min(sorted.len())],
        }),
    };
    Ok(ScanResult {
        k,
        boundaries,
        estimates,
        l,
        local_max_indices,
        c_t,
        chi_threshold,
        counts,
    })
}
