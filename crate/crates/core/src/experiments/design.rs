use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{ParamSchedule, StepSchedule};

/// Vertex-step indicators of the reference design for any horizon: odd steps
/// are vertex steps, and so is step `5s` for every integer `s` in
/// `[T/6, T/5]`.
pub fn section4_steps(horizon: usize) -> Result<StepSchedule> {
    let mut bits: Vec<bool> = (1..=horizon).map(|t| t % 2 == 1).collect();
    let first = horizon.div_ceil(6);
    let last = horizon / 5;
    for s in first..=last {
        let t = 5 * s;
        if (1..=horizon).contains(&t) {
            bits[t - 1] = true;
        }
    }
    StepSchedule::explicit(bits)
}

/// Offsets `alpha1` on `[1, 23T/75]`, `alpha2` on `(23T/75, 2T/3]` and
/// `alpha3` on `(2T/3, T]`; equal neighbours are merged so the schedule only
/// lists genuine change points.
pub fn three_phase_schedule(horizon: usize, alphas: [f64; 3]) -> Result<ParamSchedule> {
    if horizon % 150 != 0 {
        return Err(Error::Config(format!(
            "horizon {horizon} must be a multiple of 150 so that 23T/75, T/6, T/5 and 2T/3 are integers"
        )));
    }
    let starts = [1, 23 * horizon / 75 + 1, 2 * horizon / 3 + 1];
    let mut segments: Vec<(usize, f64)> = Vec::new();
    for (start, a) in starts.into_iter().zip(alphas) {
        if segments.last().map(|s| s.1) != Some(a) {
            segments.push((start, a));
        }
    }
    ParamSchedule::new(segments, horizon)
}

/// The reference simulation design.
pub fn make_section4_design(
    horizon: usize,
    alpha1: f64,
    alpha2: f64,
    alpha3: f64,
) -> Result<(ParamSchedule, StepSchedule)> {
    let params = three_phase_schedule(horizon, [alpha1, alpha2, alpha3])?;
    Ok((params, section4_steps(horizon)?))
}

/// How the vertex-step indicators of a design are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepDesign {
    Section4,
    AllVertex,
    Bernoulli { p: f64 },
}

/// Three-phase offset schedule together with a step design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub horizon: usize,
    pub alphas: [f64; 3],
    pub steps: StepDesign,
}

impl Design {
    pub fn build(&self) -> Result<(ParamSchedule, StepSchedule)> {
        let params = three_phase_schedule(self.horizon, self.alphas)?;
        let steps = match self.steps {
            StepDesign::Section4 => section4_steps(self.horizon)?,
            StepDesign::AllVertex => StepSchedule::all_vertex(self.horizon)?,
            StepDesign::Bernoulli { p } => StepSchedule::bernoulli(p, self.horizon)?,
        };
        Ok((params, steps))
    }
}
