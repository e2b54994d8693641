use serde::{Deserialize, Serialize};

use super::scan::{cuts, scan, CountMethod, ScanConfig, ScanResult};
use crate::error::{Error, Result};
use crate::estimation::{solve_a, SolveStatus, SolverConfig};
use crate::process::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Pieces per stage.
    pub k: usize,
    /// Stages after the first candidate interval `V`.
    pub q_max: usize,
    /// Stop once the candidate interval is at most this long.
    pub min_len: usize,
    pub min_interval: usize,
    pub solver: SolverConfig,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            k: 5,
            q_max: 2,
            min_len: 100,
            min_interval: super::scan::MIN_INTERVAL,
            solver: SolverConfig::default(),
        }
    }
}

/// One stage of the refinement: the partition it searched and the interval it
/// selected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineStage {
    pub cuts: Vec<usize>,
    /// 1-based indices of the candidate pieces and their `|a_left - a_right|`.
    pub candidates: Vec<usize>,
    pub l_tilde: Vec<f64>,
    pub j_hat: usize,
    pub interval: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineResult {
    /// The stretch of time treated as the whole series.
    pub window: (usize, usize),
    /// `stages[0]` selects `V`, `stages[q]` selects `V^(q)`.
    pub stages: Vec<RefineStage>,
    pub final_interval: (usize, usize),
}

impl RefineResult {
    pub fn intervals(&self) -> Vec<(usize, usize)> {
        self.stages.iter().map(|s| s.interval).collect()
    }
}

/// Whether `t` lies in the closed interval.
pub fn interval_contains(interval: (usize, usize), t: usize) -> bool {
    interval.0 <= t && t <= interval.1
}

/// Estimate used inside the refinement; boundary estimates keep their pinned value.
fn point_estimate(trace: &Trace, t0: usize, t1: usize, cfg: &RefineConfig) -> Result<f64> {
    if t1 - t0 < cfg.min_interval {
        return Err(Error::Capacity(format!(
            "interval ({t0}, {t1}] is shorter than {}",
            cfg.min_interval
        )));
    }
    let est = solve_a(trace, t0, t1, &cfg.solver)?;
    if est.status == SolveStatus::NoSolution {
        return Err(Error::Degenerate(format!("no estimate on ({t0}, {t1}]")));
    }
    Ok(est.a_hat)
}

/// Three consecutive pieces around `j`, clamped to `first..=last`.
fn triple(j: usize, first: usize, last: usize) -> (usize, usize) {
    if j <= first {
        (first, first + 2)
    } else if j >= last {
        (last - 2, last)
    } else {
        (j - 1, j + 1)
    }
}

fn stage(
    trace: &Trace,
    window: (usize, usize),
    span: (usize, usize),
    first: usize,
    last: usize,
    cfg: &RefineConfig,
) -> Result<RefineStage> {
    let c = cuts(span.0, span.1, cfg.k);
    let candidates: Vec<usize> = (first..=last).collect();
    let l_tilde = candidates
        .iter()
        .map(|&i| {
            let left = point_estimate(trace, window.0, c[i - 1], cfg)?;
            let right = point_estimate(trace, c[i], window.1, cfg)?;
            Ok((left - right).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut j_hat = candidates[0];
    let mut best = f64::NEG_INFINITY;
    for (&i, &v) in candidates.iter().zip(&l_tilde) {
        if v > best {
            best = v;
            j_hat = i;
        }
    }
    let (lo, hi) = triple(j_hat, first, last);
    Ok(RefineStage {
        interval: (c[lo - 1], c[hi]),
        cuts: c,
        candidates,
        l_tilde,
        j_hat,
    })
}

/// Nested search for the interval holding a single change point inside
/// `window`.
///
/// Stage 0 splits the window into `k` pieces and scores the interior pieces
/// `2..=k-1` by the gap between the estimate left of the piece and the one
/// right of it, keeping the best piece and its neighbours as `V`. Every later
/// stage splits the current interval into `k` pieces, scores all of them the
/// same way (estimates still reach back to the window ends) and keeps three.
pub fn refine_window(
    trace: &Trace,
    window: (usize, usize),
    cfg: &RefineConfig,
) -> Result<RefineResult> {
    if cfg.k < 5 {
        return Err(Error::Config(format!("refinement needs k >= 5, got {}", cfg.k)));
    }
    if window.0 >= window.1 || window.1 > trace.horizon() {
        return Err(Error::Range {
            t: window.1,
            lo: window.0,
            hi: trace.horizon(),
        });
    }
    let mut stages = vec![stage(trace, window, window, 2, cfg.k - 1, cfg)?];
    let mut current = stages[0].interval;
    for _ in 0..cfg.q_max {
        if current.1 - current.0 <= cfg.min_len {
            break;
        }
        let next = stage(trace, window, current, 1, cfg.k, cfg)?;
        current = next.interval;
        stages.push(next);
    }
    Ok(RefineResult {
        window,
        stages,
        final_interval: current,
    })
}

/// [`refine_window`] over the whole trace.
pub fn refine_interval(trace: &Trace, cfg: &RefineConfig) -> Result<RefineResult> {
    refine_window(trace, (0, trace.horizon()), cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStepResult {
    pub scan: ScanResult,
    pub method: CountMethod,
    pub count: usize,
    /// Selected `L_j` indices, largest first.
    pub selected: Vec<usize>,
    pub refinements: Vec<RefineResult>,
}

/// Window of scan intervals handed to the refinement for a selected `L_j`:
/// pieces `j-1..=j+1`, shrunk so it never reaches past a neighbouring
/// selected index.
pub fn selection_window(j: usize, selected: &[usize], k: usize) -> (usize, usize) {
    let mut lo = j.saturating_sub(1).max(1);
    let mut hi = (j + 1).min(k);
    for &other in selected {
        if other < j && other + 2 >= j {
            lo = lo.max(other + 1).min(j);
        }
        if other > j && other <= j + 2 {
            hi = hi.min(other - 1).max(j);
        }
    }
    (lo, hi)
}

/// Counts change points with a scan, then refines each selected local maximum.
pub fn two_step_detect(
    trace: &Trace,
    scan_cfg: &ScanConfig,
    method: CountMethod,
    refine_cfg: &RefineConfig,
) -> Result<TwoStepResult> {
    let scanned = scan(trace, scan_cfg)?;
    let count = scanned.counts.get(method);
    let selected = scanned.top_local_maxima(count);
    let refinements = selected
        .iter()
        .map(|&j| {
            let (lo, hi) = selection_window(j, &selected, scanned.k);
            let window = (scanned.boundaries[lo - 1], scanned.boundaries[hi]);
            refine_window(trace, window, refine_cfg).map_err(|e| e.in_interval(j))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TwoStepResult {
        scan: scanned,
        method,
        count,
        selected,
        refinements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triples_clamp() {
        assert_eq!(triple(2, 2, 4), (2, 4));
        assert_eq!(triple(3, 2, 4), (2, 4));
        assert_eq!(triple(4, 2, 4), (2, 4));
        assert_eq!(triple(1, 1, 5), (1, 3));
        assert_eq!(triple(5, 1, 5), (3, 5));
        assert_eq!(triple(3, 1, 5), (2, 4));
    }

    #[test]
    fn windows_do_not_overlap() {
        assert_eq!(selection_window(10, &[10, 20], 30), (9, 11));
        assert_eq!(selection_window(10, &[10, 12], 30), (9, 11));
        assert_eq!(selection_window(12, &[10, 12], 30), (11, 13));
        assert_eq!(selection_window(10, &[10, 11], 30), (9, 10));
        assert_eq!(selection_window(2, &[2], 30), (1, 3));
        assert_eq!(selection_window(30, &[30], 30), (29, 30));
    }

    #[test]
    fn containment() {
        assert!(interval_contains((1500, 6000), 5001));
        assert!(interval_contains((1500, 6000), 1500));
        assert!(!interval_contains((1500, 6000), 6001));
    }
}
