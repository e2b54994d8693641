use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, STREAM_STEPS};

/// Largest admissible |a|.
pub const A_MAX: f64 = 1e6;

/// Piecewise-constant attachment offset over the time steps `1..=horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSchedule {
    segments: Vec<(usize, f64)>,
    horizon: usize,
}

fn check_offset(a: f64) -> Result<()> {
    if !a.is_finite() || a <= -1.0 || a.abs() > A_MAX {
        return Err(Error::Config(format!(
            "offset {a} must be finite, > -1 and at most {A_MAX:e} in magnitude"
        )));
    }
    Ok(())
}

impl ParamSchedule {
    /// Schedule from `(start, a)` segments; the first segment must start at 1.
    pub fn new(segments: Vec<(usize, f64)>, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        match segments.first() {
            Some(&(1, _)) => {}
            _ => return Err(Error::Config("first segment must start at t = 1".into())),
        }
        for w in segments.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Config("segment starts must be strictly increasing".into()));
            }
        }
        if segments.last().map(|s| s.0).unwrap_or(0) > horizon {
            return Err(Error::Config("segment starts beyond the horizon".into()));
        }
        for &(_, a) in &segments {
            check_offset(a)?;
        }
        Ok(Self { segments, horizon })
    }

    pub fn constant(a: f64, horizon: usize) -> Result<Self> {
        Self::new(vec![(1, a)], horizon)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn segments(&self) -> &[(usize, f64)] {
        &self.segments
    }

    /// Offset in force at step `t`.
    pub fn value(&self, t: usize) -> Result<f64> {
        if t == 0 || t > self.horizon {
            return Err(Error::Range {
                t,
                lo: 1,
                hi: self.horizon,
            });
        }
        let idx = self.segments.partition_point(|&(start, _)| start <= t) - 1;
        Ok(self.segments[idx].1)
    }

    /// Dense table of offsets; entry 0 is unused and repeats step 1.
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.horizon + 1);
        out.push(self.segments[0].1);
        let mut seg = 0;
        for t in 1..=self.horizon {
            while seg + 1 < self.segments.len() && self.segments[seg + 1].0 <= t {
                seg += 1;
            }
            out.push(self.segments[seg].1);
        }
        out
    }

    /// First steps of every segment after the first, i.e. the change points.
    pub fn change_points(&self) -> Vec<usize> {
        self.segments.iter().skip(1).map(|s| s.0).collect()
    }

    /// Whether the offset is constant on the steps `lo..=hi`.
    pub fn is_constant_on(&self, lo: usize, hi: usize) -> bool {
        self.change_points().iter().all(|&r| r <= lo || r > hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepKind {
    /// `bits[t - 1]` is y_t.
    Explicit { bits: Vec<bool> },
    /// y_t ~ Bernoulli(p) independently.
    Bernoulli { p: f64 },
}

/// Source of the vertex-step indicators y_1..y_T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub kind: StepKind,
    pub horizon: usize,
}

impl StepSchedule {
    pub fn explicit(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::Config("empty step sequence".into()));
        }
        let horizon = bits.len();
        Ok(Self {
            kind: StepKind::Explicit { bits },
            horizon,
        })
    }

    pub fn bernoulli(p: f64, horizon: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || horizon == 0 {
            return Err(Error::Config(format!(
                "vertex-step probability {p} must lie in [0, 1] with a positive horizon"
            )));
        }
        Ok(Self {
            kind: StepKind::Bernoulli { p },
            horizon,
        })
    }

    /// Every step is a vertex step.
    pub fn all_vertex(horizon: usize) -> Result<Self> {
        Self::explicit(vec![true; horizon])
    }

    /// Indicator column `y_0..=y_T` with `y_0 = false`. Bernoulli schedules
    /// draw from the step stream of `seed`, independent of the process stream.
    pub fn realize(&self, seed: u64) -> Vec<bool> {
        let mut y = Vec::with_capacity(self.horizon + 1);
        y.push(false);
        match &self.kind {
            StepKind::Explicit { bits } => y.extend_from_slice(bits),
            StepKind::Bernoulli { p } => {
                let mut rng = stream_rng(seed, STREAM_STEPS);
                y.extend((0..self.horizon).map(|_| rng.gen_bool(*p)));
            }
        }
        y
    }
}

/// Smallest running vertex density `(1 + sum_{s<=t} y_s) / t` over `t >= from`.
pub fn min_density(y: &[bool], from: usize) -> f64 {
    let mut vertices = 1usize;
    let mut best = f64::INFINITY;
    for (t, &bit) in y.iter().enumerate().skip(1) {
        vertices += bit as usize;
        if t >= from {
            best = best.min(vertices as f64 / t as f64);
        }
    }
    best
}
