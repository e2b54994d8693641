//! Interval estimation of the attachment offset.
//!
//! On an interval `(t0, t1]` the estimate solves `f(a) = x_{t1}`, where `f` is
//! the conditional mean of the leaf count given `x_{t0}`. `f` is strictly
//! decreasing in `a`, so the root is bracketed and found by bisection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{conditional_mean, conditional_moments, Moments};
use crate::process::{Trace, A_MAX};
use crate::stats::normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Absolute tolerance on `|f(a) - x|`.
    pub e_r: f64,
    pub max_iterations: usize,
    /// Lower end of the bracket, where `f` is largest.
    pub lower: f64,
    /// Cap for the doubling search of the upper end.
    pub upper_cap: f64,
    /// Confidence level of the reported interval.
    pub level: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            e_r: 0.01,
            max_iterations: 200,
            lower: -1.0 + 1e-9,
            upper_cap: A_MAX,
            level: 0.95,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_r > 0.0) {
            return Err(Error::Config(format!("e_r must be positive, got {}", self.e_r)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        if !(self.lower > -1.0 && self.lower < 1.0 && self.upper_cap >= 1.0) {
            return Err(Error::Config("bracket must satisfy -1 < lower < 1 <= upper_cap".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level {} outside (0, 1)", self.level)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    /// `x_{t1}` is at or above the largest attainable mean; the estimate is
    /// pinned at the lower bracket.
    BoundaryLow,
    /// No upper bracket below the cap, or the iteration budget ran out.
    NoSolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub t0: usize,
    pub t1: usize,
    pub a_hat: f64,
    pub f_at_hat: f64,
    pub g_at_hat: f64,
    pub df_at_hat: f64,
    pub std_err: f64,
    pub ci: Option<(f64, f64)>,
    pub iterations: usize,
    /// Width of the final bisection bracket.
    pub bracket_width: f64,
    pub status: SolveStatus,
}

impl EstimateResult {
    pub fn is_converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// `g / f'^2`, the asymptotic variance of the estimate.
    pub fn variance(&self) -> f64 {
        self.g_at_hat / (self.df_at_hat * self.df_at_hat)
    }
}

struct Window<'a> {
    trace: &'a Trace,
    t0: usize,
    t1: usize,
}

impl Window<'_> {
    fn x0(&self) -> f64 {
        self.trace.x()[self.t0] as f64
    }

    fn mean(&self, a: f64) -> Result<f64> {
        conditional_mean(a, self.t0, self.x0(), self.trace.y(), self.trace.v(), self.t1)
    }

    fn moments(&self, a: f64) -> Result<Moments> {
        conditional_moments(a, self.t0, self.x0(), self.trace.y(), self.trace.v(), self.t1)
    }
}

fn check_interval(trace: &Trace, t0: usize, t1: usize) -> Result<()> {
    if t0 >= t1 || t1 > trace.horizon() {
        return Err(Error::Range {
            t: t1,
            lo: t0 + 1,
            hi: trace.horizon(),
        });
    }
    Ok(())
}

/// Estimates a constant offset on `(t0, t1]` by bisection on `f(a) = x_{t1}`.
pub fn solve_a(trace: &Trace, t0: usize, t1: usize, cfg: &SolverConfig) -> Result<EstimateResult> {
    cfg.validate()?;
    check_interval(trace, t0, t1)?;
    let win = Window { trace, t0, t1 };
    let target = trace.x()[t1] as f64;

    let finish = |a_hat: f64, iterations: usize, width: f64, status: SolveStatus| -> Result<EstimateResult> {
        let mo = win.moments(a_hat)?;
        let std_err = mo.g.max(0.0).sqrt() / mo.df.abs();
        let mut est = EstimateResult {
            t0,
            t1,
            a_hat,
            f_at_hat: mo.f,
            g_at_hat: mo.g,
            df_at_hat: mo.df,
            std_err,
            ci: None,
            iterations,
            bracket_width: width,
            status,
        };
        if status == SolveStatus::Converged && std_err.is_finite() {
            est.ci = confidence_interval(&est, cfg.level).ok();
        }
        Ok(est)
    };

    let mut lo = cfg.lower;
    if target >= win.mean(lo)? - cfg.e_r {
        return finish(lo, 0, 0.0, SolveStatus::BoundaryLow);
    }
    let mut hi = 1.0f64;
    let mut iterations = 0;
    loop {
        let fh = win.mean(hi)?;
        if fh + cfg.e_r < target {
            break;
        }
        iterations += 1;
        if fh - cfg.e_r <= target {
            return finish(hi, iterations, hi - lo, SolveStatus::Converged);
        }
        if hi * 2.0 > cfg.upper_cap {
            return finish(hi, iterations, f64::INFINITY, SolveStatus::NoSolution);
        }
        lo = hi;
        hi *= 2.0;
    }
    while iterations < cfg.max_iterations {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let fm = win.mean(mid)?;
        if (fm - target).abs() <= cfg.e_r {
            return finish(mid, iterations, hi - lo, SolveStatus::Converged);
        }
        if fm > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    finish(0.5 * (lo + hi), iterations, hi - lo, SolveStatus::NoSolution)
}

/// `a_hat ± z * sqrt(g) / |f'|` at confidence `level`.
pub fn confidence_interval(est: &EstimateResult, level: f64) -> Result<(f64, f64)> {
    if est.status != SolveStatus::Converged {
        return Err(Error::Degenerate(format!(
            "confidence interval needs a converged estimate, status is {:?}",
            est.status
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level {level} outside (0, 1)")));
    }
    if est.df_at_hat == 0.0 || !est.std_err.is_finite() {
        return Err(Error::Degenerate("f'(a_hat) is zero".into()));
    }
    let z = normal_quantile((1.0 + level) / 2.0)?;
    let half = z * est.std_err;
    Ok((est.a_hat - half, est.a_hat + half))
}

/// `(x_{t1} - f(a)) / sqrt(g(a))` at a known offset.
pub fn standardized_residual(trace: &Trace, t0: usize, t1: usize, a_true: f64) -> Result<f64> {
    check_interval(trace, t0, t1)?;
    let win = Window { trace, t0, t1 };
    let mo = win.moments(a_true)?;
    if !(mo.g > 0.0) {
        return Err(Error::Degenerate(format!("conditional variance {} on ({t0}, {t1}]", mo.g)));
    }
    Ok((trace.x()[t1] as f64 - mo.f) / mo.g.sqrt())
}

/// `f'(a_hat) (a_hat - a) / sqrt(g(a_hat))`, asymptotically standard normal.
pub fn pivot(est: &EstimateResult, a_true: f64) -> f64 {
    est.df_at_hat * (est.a_hat - a_true) / est.g_at_hat.sqrt()
}
