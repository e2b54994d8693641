use crate::error::{Error, Result};

/// One-step law of the leaf count.
///
/// Probabilities of `Δx = +1, 0, -1, -2` for a step with leaf weight `m`,
/// current leaf count `x` and vertex-step indicator `vertex_step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafKernel {
    pub up: f64,
    pub stay: f64,
    pub down_one: f64,
    pub down_two: f64,
}

impl LeafKernel {
    pub const DELTAS: [i64; 4] = [1, 0, -1, -2];

    pub fn probs(&self) -> [f64; 4] {
        [self.up, self.stay, self.down_one, self.down_two]
    }

    /// Index into [`Self::DELTAS`] for a uniform draw `u` in `[0, 1)`.
    pub fn pick(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, p) in self.probs().into_iter().enumerate().take(3) {
            acc += p;
            if u < acc {
                return i;
            }
        }
        3
    }
}

/// Transition probabilities of the leaf-count chain.
pub fn transition_probs(x: u64, m: f64, vertex_step: bool) -> Result<LeafKernel> {
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::Domain(format!("leaf weight {m} outside [0, 1]")));
    }
    let xf = x as f64;
    let mx = m * xf;
    if mx > 1.0 + 1e-12 {
        return Err(Error::Domain(format!(
            "inconsistent state: m*x = {mx} exceeds 1 (x = {x}, m = {m})"
        )));
    }
    let mx = mx.min(1.0);
    let kernel = if vertex_step {
        LeafKernel {
            up: 1.0 - mx,
            stay: mx,
            down_one: 0.0,
            down_two: 0.0,
        }
    } else {
        let miss = 1.0 - mx;
        LeafKernel {
            up: 0.0,
            stay: miss * miss,
            down_one: 2.0 * mx * miss + xf * m * m,
            down_two: (xf - 1.0) * xf * m * m,
        }
    };
    Ok(kernel)
}
