use rand::Rng;

use super::schedule::{ParamSchedule, StepSchedule};
use super::trace::Trace;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, STREAM_PROCESS};

/// Full multigraph state, tracked through degrees only.
///
/// `excess` lists vertex `u` exactly `d(u) - 1` times, so a uniform draw from
/// it is a draw proportional to `d(u) - 1`. Vertex 0 starts with a phantom
/// half-edge of degree 1 and no entries.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphState {
    pub t: usize,
    pub degrees: Vec<u64>,
    pub excess: Vec<u32>,
    pub leaves: u64,
}

impl Default for GraphState {
    fn default() -> Self {
        Self::new()
    }
}

impl GraphState {
    pub fn new() -> Self {
        Self {
            t: 0,
            degrees: vec![1],
            excess: Vec::new(),
            leaves: 1,
        }
    }

    pub fn vertices(&self) -> u64 {
        self.degrees.len() as u64
    }

    pub fn degree_sum(&self) -> u64 {
        self.degrees.iter().sum()
    }

    /// Draws a vertex with probability proportional to `d(u) + a`.
    ///
    /// The weight splits as `(d(u) - 1) + (1 + a)`: the first part is a
    /// uniform pick from `excess`, the second a uniform pick over vertices.
    /// Both parts are nonnegative for every `a > -1`.
    fn draw<R: Rng>(&self, a: f64, rng: &mut R) -> usize {
        let n_excess = self.excess.len() as f64;
        let total = n_excess + (1.0 + a) * self.degrees.len() as f64;
        if rng.gen::<f64>() * total < n_excess {
            self.excess[rng.gen_range(0..self.excess.len())] as usize
        } else {
            rng.gen_range(0..self.degrees.len())
        }
    }

    fn bump(&mut self, u: usize) {
        if self.degrees[u] == 1 {
            self.leaves -= 1;
        }
        self.degrees[u] += 1;
        self.excess.push(u as u32);
    }

    /// Performs step `t + 1` with offset `a`.
    pub fn step<R: Rng>(&mut self, a: f64, vertex_step: bool, rng: &mut R) {
        if vertex_step {
            let u = self.draw(a, rng);
            self.bump(u);
            self.degrees.push(1);
            self.leaves += 1;
        } else {
            let u = self.draw(a, rng);
            let w = self.draw(a, rng);
            self.bump(u);
            self.bump(w);
        }
        self.t += 1;
    }
}

pub(crate) fn check_horizon(
    psched: &ParamSchedule,
    ssched: &StepSchedule,
    horizon: usize,
) -> Result<()> {
    if horizon == 0 || horizon > psched.horizon() || horizon > ssched.horizon {
        return Err(Error::Config(format!(
            "horizon {horizon} must be positive and covered by both schedules ({} / {})",
            psched.horizon(),
            ssched.horizon
        )));
    }
    Ok(())
}

/// Simulates the multigraph for `horizon` steps and records its trace.
pub fn simulate_graph(
    psched: &ParamSchedule,
    ssched: &StepSchedule,
    horizon: usize,
    seed: u64,
) -> Result<(Trace, GraphState)> {
    check_horizon(psched, ssched, horizon)?;
    let a = psched.values();
    let mut y = ssched.realize(seed);
    y.truncate(horizon + 1);
    let mut rng = stream_rng(seed, STREAM_PROCESS);
    let mut state = GraphState::new();
    let mut x = Vec::with_capacity(horizon + 1);
    x.push(state.leaves);
    for t in 1..=horizon {
        state.step(a[t], y[t], &mut rng);
        x.push(state.leaves);
    }
    let trace = Trace::from_steps(y, x, Some(a[..=horizon].to_vec()))?;
    Ok((trace, state))
}
