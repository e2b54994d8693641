//! Normal and chi-square helpers plus small sample summaries.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn check_probability(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability {p} outside (0, 1)")));
    }
    Ok(())
}

/// Inverse standard normal CDF.
pub fn normal_quantile(p: f64) -> Result<f64> {
    check_probability(p)?;
    if p == 0.5 {
        return Ok(0.0);
    }
    // evaluate in the lower tail and reflect so the result is exactly odd
    let lower = p.min(1.0 - p);
    let z = standard_normal().inverse_cdf(lower);
    Ok(if p < 0.5 { z } else { -z })
}

pub fn normal_cdf(z: f64) -> f64 {
    standard_normal().cdf(z)
}

/// Quantile of the chi-square distribution with one degree of freedom at
/// level `beta`, via `P(chi2_1 <= q) = 2 Phi(sqrt q) - 1`.
pub fn chi2_1_quantile(beta: f64) -> Result<f64> {
    check_probability(beta)?;
    let z = normal_quantile((1.0 + beta) / 2.0)?;
    Ok(z * z)
}

/// Upper-tail probability of chi-square(1) at `q`.
pub fn chi2_1_sf(q: f64) -> f64 {
    if q <= 0.0 {
        return 1.0;
    }
    2.0 * (1.0 - normal_cdf(q.sqrt()))
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and
/// the standard normal.
pub fn ks_distance_normal(samples: &[f64]) -> f64 {
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = normal_cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two samples.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Linear-interpolated empirical quantile (type 7).
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}
