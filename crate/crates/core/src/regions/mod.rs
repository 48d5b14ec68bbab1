//! Confidence regions: the enlargement parameter `δ`, the polynomial factor,
//! integration rectangles around the likelihood peak, the Monte Carlo
//! normalization bound and the confidence solve.

mod confidence;
mod rectangle;

pub use confidence::{
    check_epsilon, log10_eps2_upper_bound, solve_confidence, Analysis, BoundEvaluation, ConfidenceParams,
    ConfidenceReport, Method, RegionAssignment,
};
pub use rectangle::{build_rectangle, build_rectangle_around, mc_normalization_lower_bound, NormalizationEstimate, Rectangle};

use std::f64::consts::LN_10;

use crate::error::{Error, Result};

fn check_counts(n: u64, d: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("the number of runs must be at least 1".into()));
    }
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    Ok(())
}

/// `δ = √((2/n)[ln(2/ε) + (d²−1) ln n])`.
pub fn delta(n: u64, d: usize, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("ε = {epsilon} outside (0, 1)")));
    }
    delta_log10(n, d, epsilon.log10())
}

/// `δ` with `ε` given as `log₁₀ ε`, usable far below the `f64` range of `ε`.
pub fn delta_log10(n: u64, d: usize, log10_epsilon: f64) -> Result<f64> {
    check_counts(n, d)?;
    if !(log10_epsilon < 0.0) {
        return Err(Error::InvalidParameter(format!("log₁₀ ε = {log10_epsilon} must be negative")));
    }
    let nf = n as f64;
    let dim_term = (d * d - 1) as f64 * nf.ln();
    let delta2 = (2.0 / nf) * (2f64.ln() - log10_epsilon * LN_10 + dim_term);
    Ok(delta2.max(0.0).sqrt())
}

/// `log₁₀ c_{n,d} = log₁₀ 2 + ((d²−1)/2) log₁₀ n`.
pub fn log10_polynomial_factor(n: u64, d: usize) -> Result<f64> {
    check_counts(n, d)?;
    Ok(2f64.log10() + ((d * d - 1) as f64 / 2.0) * (n as f64).log10())
}

/// Smallest `n` with `δ(n, d, ε) < 1`, searching `n > e` where `δ` decreases.
pub fn min_runs_below_unit_delta(d: usize, log10_epsilon: f64) -> Result<u64> {
    let below = |n: u64| delta_log10(n, d, log10_epsilon).map(|v| v < 1.0);
    let mut lo = 3u64;
    if below(lo)? {
        return Ok(lo);
    }
    let mut hi = 6u64;
    while !below(hi)? {
        lo = hi;
        hi = hi.checked_mul(2).ok_or_else(|| Error::InvalidParameter("no n found".into()))?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if below(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
