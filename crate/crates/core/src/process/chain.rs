use rand::Rng;

use super::graph::check_horizon;
use super::kernel::{transition_probs, LeafKernel};
use super::schedule::{ParamSchedule, StepSchedule};
use super::trace::Trace;
use crate::error::{Error, Result};
use crate::moments::m_value;
use crate::rng::{stream_rng, STREAM_PROCESS};

/// Reduced state of the leaf-count Markov chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainState {
    pub t: usize,
    pub x: u64,
    pub v: u64,
}

impl Default for ChainState {
    fn default() -> Self {
        Self { t: 0, x: 1, v: 1 }
    }
}

impl ChainState {
    fn check(&self) -> Result<()> {
        if self.v == 0 || self.x > self.v || self.v > self.t as u64 + 1 {
            return Err(Error::Config(format!(
                "invalid chain state x={} v={} at t={}",
                self.x, self.v, self.t
            )));
        }
        Ok(())
    }
}

/// Runs the leaf-count chain from `init` through step `horizon`, using the
/// indicators `y` (indexed by time). Returns the state after every step,
/// starting with `init`.
pub fn run_chain<R: Rng>(
    a: &[f64],
    y: &[bool],
    init: ChainState,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<ChainState>> {
    init.check()?;
    let mut state = init;
    let mut path = Vec::with_capacity(horizon.saturating_sub(init.t) + 1);
    path.push(state);
    for t in init.t + 1..=horizon {
        let (m, _) = m_value(a[t], t, state.v)?;
        let kernel = transition_probs(state.x, m, y[t])?;
        let delta = LeafKernel::DELTAS[kernel.pick(rng.gen::<f64>())];
        state = ChainState {
            t,
            x: (state.x as i64 + delta) as u64,
            v: state.v + y[t] as u64,
        };
        path.push(state);
    }
    Ok(path)
}

/// Simulates the leaf count directly from its one-step law, starting from the
/// single-vertex graph. Same law as the `x` column of
/// [`simulate_graph`](super::simulate_graph), and the same `y` column for a
/// given seed.
pub fn simulate_chain(
    psched: &ParamSchedule,
    ssched: &StepSchedule,
    horizon: usize,
    seed: u64,
) -> Result<Trace> {
    check_horizon(psched, ssched, horizon)?;
    let a = psched.values();
    let mut y = ssched.realize(seed);
    y.truncate(horizon + 1);
    let mut rng = stream_rng(seed, STREAM_PROCESS);
    let path = run_chain(&a, &y, ChainState::default(), horizon, &mut rng)?;
    let x = path.iter().map(|s| s.x).collect();
    Trace::from_steps(y, x, Some(a[..=horizon].to_vec()))
}

/// Like [`simulate_chain`] but from an arbitrary starting state.
pub fn simulate_chain_from(
    psched: &ParamSchedule,
    ssched: &StepSchedule,
    horizon: usize,
    seed: u64,
    init: ChainState,
) -> Result<Vec<ChainState>> {
    check_horizon(psched, ssched, horizon)?;
    let a = psched.values();
    let y = ssched.realize(seed);
    let mut rng = stream_rng(seed, STREAM_PROCESS);
    run_chain(&a, &y, init, horizon, &mut rng)
}
