//! Measurement records, log-likelihood evaluation and likelihood maximization.

mod data;
mod solver;

pub use data::{multinomial, simulate_counts, ExperimentData, Outcome, Setting, COMPLETENESS_TOL};
pub use solver::{
    constrained_maximum, max_loglik_over_gamma_alpha_complement, mle, mle_certified, Maximum, SolverOptions,
};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::qstate::DensityMatrix;

/// Stable `ln(e^a + e^b)`, accepting `−∞` for either argument.
pub fn log_add(log_a: f64, log_b: f64) -> f64 {
    let (hi, lo) = if log_a >= log_b { (log_a, log_b) } else { (log_b, log_a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `Σ_k n_k ln tr(σE_k)`; `−∞` when an observed outcome has zero probability.
pub fn log_likelihood(data: &ExperimentData, sigma: &DensityMatrix) -> Result<f64> {
    if sigma.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            found: sigma.dim(),
        });
    }
    Ok(log_likelihood_of(data, sigma.matrix()))
}

/// Log-likelihood of any Hermitian operator of matching size.
pub(crate) fn log_likelihood_of(data: &ExperimentData, m: &CMatrix) -> f64 {
    let mut total = 0.0;
    for o in data.outcomes() {
        if o.count == 0 {
            continue;
        }
        let p = linalg::inner(m, &o.effect);
        if !(p > 0.0) {
            return f64::NEG_INFINITY;
        }
        total += o.count as f64 * p.ln();
    }
    total
}

/// Gradient `Σ_k n_k E_k / tr(σE_k)`; `None` where the likelihood vanishes.
pub fn gradient(data: &ExperimentData, sigma: &DensityMatrix) -> Option<CMatrix> {
    gradient_of(data, sigma.matrix())
}

pub(crate) fn gradient_of(data: &ExperimentData, m: &CMatrix) -> Option<CMatrix> {
    let d = data.dim();
    let mut g = CMatrix::zeros(d, d);
    for o in data.outcomes() {
        if o.count == 0 {
            continue;
        }
        let p = linalg::inner(m, &o.effect);
        if !(p > 0.0) {
            return None;
        }
        g += o.effect.scale(o.count as f64 / p);
    }
    Some(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{ops, sample_hs_state};
    use crate::rng;
    use approx::assert_abs_diff_eq;

    fn z_data(c0: u64, c1: u64) -> ExperimentData {
        ExperimentData::new(2, vec![Setting::pauli("z", &[c0, c1]).unwrap()]).unwrap()
    }

    #[test]
    fn log_add_examples() {
        assert_eq!(log_add(1.5, f64::NEG_INFINITY), 1.5);
        assert_eq!(log_add(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
        assert_abs_diff_eq!(log_add(2f64.ln(), 3f64.ln()), 5f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(log_add(-1000.0, -1000.0), -1000.0 + 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(log_add(1000.0, 1000.0), 1000.0 + 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn log_likelihood_examples() {
        let mixed = DensityMatrix::maximally_mixed(2);
        assert_eq!(log_likelihood(&z_data(0, 0), &mixed).unwrap(), 0.0);
        assert_abs_diff_eq!(log_likelihood(&z_data(3, 1), &mixed).unwrap(), 4.0 * 0.5f64.ln(), epsilon = 1e-14);
        let up = DensityMatrix::pure(&ops::ket0()).unwrap();
        assert_eq!(log_likelihood(&z_data(3, 1), &up).unwrap(), f64::NEG_INFINITY);
        assert!(matches!(
            log_likelihood(&z_data(1, 1), &DensityMatrix::maximally_mixed(4)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = ExperimentData::pauli_settings(&[
            ("xx", vec![10, 3, 4, 12]),
            ("yy", vec![2, 9, 11, 3]),
            ("zz", vec![13, 1, 2, 10]),
        ])
        .unwrap();
        let mut r = rng::stream(2);
        for _ in 0..10 {
            let s = sample_hs_state(4, &mut r).unwrap();
            let t = sample_hs_state(4, &mut r).unwrap();
            let dir = t.matrix() - s.matrix();
            let g = gradient(&data, &s).unwrap();
            let h = 1e-7;
            let fd = (log_likelihood_of(&data, &(s.matrix() + dir.scale(h)))
                - log_likelihood_of(&data, &(s.matrix() - dir.scale(h))))
                / (2.0 * h);
            assert_abs_diff_eq!(fd, linalg::inner(&g, &dir), epsilon = 1e-4 * fd.abs().max(1.0));
        }
    }
}
