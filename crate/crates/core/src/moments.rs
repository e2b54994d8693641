//! Conditional moments of the leaf count.
//!
//! Given the vertex-step indicators, the vector `(x_t^2, x_t, 1)` evolves in
//! conditional expectation by a 3x3 upper-triangular matrix that depends only
//! on the offset, the time and the vertex count before the step. Propagating
//! it from `(x0^2, x0, 1)` yields the conditional mean `f` and variance `g` of
//! a later leaf count. The derivative with respect to the offset is carried
//! along the same recursion.

use crate::error::{Error, Result};
use crate::process::{transition_probs, ParamSchedule};

/// Leaf weight `m = (1 + a) / (2t - 1 + a v_prev)` and its derivative in `a`.
pub fn m_value(a: f64, t: usize, v_prev: u64) -> Result<(f64, f64)> {
    let base = 2.0 * t as f64 - 1.0;
    let vp = v_prev as f64;
    let denom = base + a * vp;
    if !(denom > 0.0) || t == 0 {
        return Err(Error::Domain(format!(
            "nonpositive attachment mass {denom} at t={t} (a={a}, v={v_prev})"
        )));
    }
    let m = (1.0 + a) / denom;
    let dm = (base - vp) / (denom * denom);
    Ok((m, dm))
}

/// Nonconstant entries of the one-step moment matrix and their `a`-derivatives.
///
/// ```text
/// | sq_sq  sq_lin  y |
/// |   0    lin_lin y |
/// |   0      0     1 |
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMatrix {
    pub sq_sq: f64,
    pub sq_lin: f64,
    pub lin_lin: f64,
    pub y: f64,
    pub m: f64,
    pub dm: f64,
    pub d_sq_sq: f64,
    pub d_sq_lin: f64,
    pub d_lin_lin: f64,
    /// `lin_lin - 1`, kept so that the mean update adds a small correction
    /// to `x` instead of rescaling it.
    lin_dev: f64,
}

/// Unevaluated sum `hi + lo`, good for about 106 bits.
#[derive(Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn from(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        Self {
            hi: s,
            lo: (a - (s - bb)) + (b - bb),
        }
    }

    fn product(a: f64, b: f64) -> Self {
        let p = a * b;
        Self {
            hi: p,
            lo: a.mul_add(b, -p),
        }
    }

    fn add(self, o: Self) -> Self {
        let s = Self::sum(self.hi, o.hi);
        Self::sum(s.hi, s.lo + self.lo + o.lo)
    }

    fn scale(self, b: f64) -> Self {
        let p = Self::product(self.hi, b);
        Self::sum(p.hi, p.lo + self.lo * b)
    }

    fn round(self) -> f64 {
        self.hi + self.lo
    }
}

/// `(sq_sq - 1, lin_lin - 1)` evaluated without forming the diagonal first.
#[inline]
fn diagonal_deviations(m: f64, vertex_step: bool) -> (f64, f64) {
    if vertex_step {
        (-2.0 * m, -m)
    } else {
        (-4.0 * m * (1.0 - m), -m * (2.0 - m))
    }
}

impl StepMatrix {
    /// Matrix for a step with leaf weight `m` (derivative `dm`).
    pub fn from_weight(m: f64, dm: f64, vertex_step: bool) -> Self {
        let y = if vertex_step { 1.0 } else { 0.0 };
        let e = 1.0 - y;
        let (sq_dev, lin_dev) = diagonal_deviations(m, vertex_step);
        let sq_sq = 1.0 + sq_dev;
        let sq_lin = e * (2.0 * m - 3.0 * m * m) + y * (2.0 - m);
        let lin_lin = 1.0 + lin_dev;
        let d_sq_sq_dm = -2.0 * y + e * (8.0 * m - 4.0);
        let d_sq_lin_dm = e * (2.0 - 6.0 * m) - y;
        let d_lin_lin_dm = -(1.0 - e * m) - e * (1.0 - m);
        Self {
            sq_sq,
            sq_lin,
            lin_lin,
            y,
            m,
            dm,
            d_sq_sq: d_sq_sq_dm * dm,
            d_sq_lin: d_sq_lin_dm * dm,
            d_lin_lin: d_lin_lin_dm * dm,
            lin_dev,
        }
    }

    /// Row one applied to `(x^2, x, 1)`. The coefficients cancel heavily when
    /// `m x` is near one, so they and the products are carried in
    /// double-double and rounded once.
    fn second_row(&self, second: f64, first: f64) -> f64 {
        let m = self.m;
        let (sq_dev, sq_lin) = if self.y == 1.0 {
            (Dd::from(-2.0 * m), Dd::sum(2.0, -m))
        } else {
            let m2 = Dd::product(m, m);
            (
                Dd::from(-4.0 * m).add(m2.scale(4.0)),
                Dd::from(2.0 * m).add(m2.scale(-3.0)),
            )
        };
        Dd::from(second)
            .add(sq_dev.scale(second))
            .add(sq_lin.scale(first))
            .add(Dd::from(self.y))
            .round()
    }

    /// Applies the matrix to `(x^2, x, 1)`, returning `(E x'^2, E x')`.
    pub fn apply(&self, second: f64, first: f64) -> (f64, f64) {
        (
            self.second_row(second, first),
            first + (self.lin_dev * first + self.y),
        )
    }
}

/// Matrix of step `t`, which turns G_(t-1) into G_t.
pub fn step_matrix(a: f64, t: usize, v_prev: u64, vertex_step: bool) -> Result<StepMatrix> {
    let (m, dm) = m_value(a, t, v_prev)?;
    Ok(StepMatrix::from_weight(m, dm, vertex_step))
}

/// First two conditional moments of the leaf count and their sensitivities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentState {
    pub t: usize,
    pub s1: f64,
    pub s2: f64,
    pub ds1: f64,
    pub ds2: f64,
}

impl MomentState {
    pub fn start(t0: usize, x0: f64) -> Self {
        Self {
            t: t0,
            s1: x0,
            s2: x0 * x0,
            ds1: 0.0,
            ds2: 0.0,
        }
    }

    pub fn advance(&mut self, a: &StepMatrix) {
        let (s2, s1) = a.apply(self.s2, self.s1);
        let ds2 = a.d_sq_sq * self.s2 + a.sq_sq * self.ds2 + a.d_sq_lin * self.s1 + a.sq_lin * self.ds1;
        let ds1 = a.d_lin_lin * self.s1 + a.lin_lin * self.ds1;
        self.t += 1;
        self.s1 = s1;
        self.s2 = s2;
        self.ds1 = ds1;
        self.ds2 = ds2;
    }

    pub fn mean(&self) -> f64 {
        self.s1
    }

    pub fn variance(&self) -> f64 {
        self.s2 - self.s1 * self.s1
    }

    pub fn moments(&self) -> Moments {
        Moments {
            f: self.s1,
            g: self.variance(),
            df: self.ds1,
            dg: self.ds2 - 2.0 * self.s1 * self.ds1,
        }
    }
}

/// `f`, `g` and their derivatives with respect to the offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub f: f64,
    pub g: f64,
    pub df: f64,
    pub dg: f64,
}

fn check_window(y: &[bool], v: &[u64], t0: usize, t1: usize) -> Result<()> {
    if t0 > t1 || t1 >= y.len() || y.len() != v.len() {
        return Err(Error::Range {
            t: t1,
            lo: t0,
            hi: y.len().saturating_sub(1),
        });
    }
    Ok(())
}

/// Conditional moments of `x_{t1}` given `x_{t0} = x0` under a constant
/// offset `a`. `y` and `v` are the full indicator and vertex-count columns
/// indexed by time.
pub fn conditional_moments(
    a: f64,
    t0: usize,
    x0: f64,
    y: &[bool],
    v: &[u64],
    t1: usize,
) -> Result<Moments> {
    check_window(y, v, t0, t1)?;
    let mut state = MomentState::start(t0, x0);
    for t in t0 + 1..=t1 {
        state.advance(&step_matrix(a, t, v[t - 1], y[t])?);
    }
    Ok(state.moments())
}

/// Conditional mean only; the cheap path used inside root finding.
pub fn conditional_mean(
    a: f64,
    t0: usize,
    x0: f64,
    y: &[bool],
    v: &[u64],
    t1: usize,
) -> Result<f64> {
    check_window(y, v, t0, t1)?;
    let mut mean = x0;
    for t in t0 + 1..=t1 {
        let (m, _) = m_value(a, t, v[t - 1])?;
        let lin_dev = diagonal_deviations(m, y[t]).1;
        mean += lin_dev * mean + if y[t] { 1.0 } else { 0.0 };
    }
    Ok(mean)
}

/// Moment states for every `t` in `t0..=t1` under a time-varying offset
/// (`offset(t)` is the offset of step `t`). Sensitivities are with respect to
/// a common shift of all offsets.
pub fn moment_path(
    offset: impl Fn(usize) -> f64,
    t0: usize,
    x0: f64,
    y: &[bool],
    v: &[u64],
    t1: usize,
) -> Result<Vec<MomentState>> {
    check_window(y, v, t0, t1)?;
    let mut state = MomentState::start(t0, x0);
    let mut out = Vec::with_capacity(t1 - t0 + 1);
    out.push(state);
    for t in t0 + 1..=t1 {
        state.advance(&step_matrix(offset(t), t, v[t - 1], y[t])?);
        out.push(state);
    }
    Ok(out)
}

/// Longest horizon accepted by [`brute_force_moments`].
pub const BRUTE_FORCE_MAX_STEPS: usize = 14;

/// Exact conditional mean and variance of `x_{t1}` given `x_{t0} = x0`,
/// obtained by pushing the full law of the leaf count through the one-step
/// kernel. Independent of the moment matrices; used as a validation oracle.
pub fn brute_force_moments(
    sched: &ParamSchedule,
    y: &[bool],
    t0: usize,
    x0: u64,
    t1: usize,
) -> Result<(f64, f64)> {
    if t1 < t0 || t1 - t0 > BRUTE_FORCE_MAX_STEPS {
        return Err(Error::Capacity(format!(
            "enumeration over {} steps exceeds the limit of {BRUTE_FORCE_MAX_STEPS}",
            t1.saturating_sub(t0)
        )));
    }
    if t1 >= y.len() {
        return Err(Error::Range {
            t: t1,
            lo: t0,
            hi: y.len().saturating_sub(1),
        });
    }
    let mut v = 1 + y[1..=t0].iter().filter(|&&b| b).count() as u64;
    // law[x] = P(x_t = x)
    let mut law = vec![0.0; (x0 as usize) + (t1 - t0) + 1];
    law[x0 as usize] = 1.0;
    for t in t0 + 1..=t1 {
        let (m, _) = m_value(sched.value(t)?, t, v)?;
        let mut next = vec![0.0; law.len()];
        for (x, &p) in law.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let kernel = transition_probs(x as u64, m, y[t])?;
            for (delta, q) in [1i64, 0, -1, -2].into_iter().zip(kernel.probs()) {
                if q > 0.0 {
                    next[(x as i64 + delta) as usize] += p * q;
                }
            }
        }
        law = next;
        v += y[t] as u64;
    }
    let mean: f64 = law.iter().enumerate().map(|(x, p)| x as f64 * p).sum();
    let var: f64 = law
        .iter()
        .enumerate()
        .map(|(x, p)| (x as f64 - mean).powi(2) * p)
        .sum();
    Ok((mean, var))
}
