use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{solve_a, SolveStatus, SolverConfig};
use crate::moments::{m_value, moment_path};
use crate::process::{ParamSchedule, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocateResult {
    pub t0: usize,
    pub t1: usize,
    /// Pooled estimate over `(t0, t1]`.
    pub a_hat: f64,
    pub tau_hat: usize,
    pub peak_value: f64,
    /// `|x_hat_t - x_t|` for `t = t0..=t1`.
    pub diagnostic: Vec<f64>,
}

/// Deterministic leaf recursion under a fixed offset, started from the
/// observed `x_{t0}`. Entry `j` is the value at `t0 + j`.
pub fn leaf_recursion(trace: &Trace, t0: usize, t1: usize, a: f64) -> Result<Vec<f64>> {
    let (y, v) = (trace.y(), trace.v());
    let mut out = Vec::with_capacity(t1 - t0 + 1);
    let mut xh = trace.x()[t0] as f64;
    out.push(xh);
    for t in t0 + 1..=t1 {
        let (m, _) = m_value(a, t, v[t - 1])?;
        let e = if y[t] { 0.0 } else { 1.0 };
        xh = (1.0 - m) * (1.0 - e * m) * xh + (1.0 - e);
        out.push(xh);
    }
    Ok(out)
}

/// Location from a fitted path: `argmax_{t0 < t < t1} |x_hat_t - x_t| + 1`,
/// first maximum on ties. Returns `(tau_hat, peak, diagnostic)`.
pub fn locate_from_path(x_hat: &[f64], x: &[u64], t0: usize) -> Result<(usize, f64, Vec<f64>)> {
    if x_hat.len() != x.len() || x.len() < 3 {
        return Err(Error::Capacity("location needs at least one interior time".into()));
    }
    let diagnostic: Vec<f64> = x_hat
        .iter()
        .zip(x)
        .map(|(h, &o)| (h - o as f64).abs())
        .collect();
    let mut best = 1;
    for j in 2..diagnostic.len() - 1 {
        if diagnostic[j] > diagnostic[best] {
            best = j;
        }
    }
    Ok((t0 + best + 1, diagnostic[best], diagnostic))
}

/// Estimates the position of a single change point in `(t0, t1)`.
pub fn locate(trace: &Trace, t0: usize, t1: usize, solver: &SolverConfig) -> Result<LocateResult> {
    let est = solve_a(trace, t0, t1, solver)?;
    if est.status == SolveStatus::NoSolution {
        return Err(Error::Degenerate(format!("no estimate on ({t0}, {t1}]")));
    }
    let x_hat = leaf_recursion(trace, t0, t1, est.a_hat)?;
    let (tau_hat, peak_value, diagnostic) = locate_from_path(&x_hat, &trace.x()[t0..=t1], t0)?;
    Ok(LocateResult {
        t0,
        t1,
        a_hat: est.a_hat,
        tau_hat,
        peak_value,
        diagnostic,
    })
}

/// Gap `h(t) = |E(x_t | x_S) - f_{S,t}(a_hat)|` for `t = s..=t_end` between the
/// conditional mean under the true schedule and under a constant `a_hat`.
pub fn oracle_gap(
    truth: &ParamSchedule,
    trace: &Trace,
    s: usize,
    t_end: usize,
    a_hat: f64,
) -> Result<Vec<f64>> {
    let a = truth.values();
    if t_end >= a.len() {
        return Err(Error::Range {
            t: t_end,
            lo: s,
            hi: a.len() - 1,
        });
    }
    let x0 = trace.x()[s] as f64;
    let true_path = moment_path(|t| a[t], s, x0, trace.y(), trace.v(), t_end)?;
    let fit_path = moment_path(|_| a_hat, s, x0, trace.y(), trace.v(), t_end)?;
    Ok(true_path
        .iter()
        .zip(&fit_path)
        .map(|(p, q)| (p.s1 - q.s1).abs())
        .collect())
}

/// First position of the maximum of `h` on the open range, as a time index.
pub fn oracle_peak(h: &[f64], s: usize) -> usize {
    let mut best = 1.min(h.len() - 1);
    for j in 1..h.len().saturating_sub(1) {
        if h[j] > h[best] {
            best = j;
        }
    }
    s + best
}
