use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

use crate::anneal::{self, GammaWComplement, SaParams};
use crate::error::{Error, Result};
use crate::likelihood::{self, ExperimentData, Maximum, SolverOptions};
use crate::qstate;
use crate::rng;
use crate::witness::{self, WitnessKind, WitnessSpec};

use super::rectangle::{build_rectangle_around, mc_normalization_lower_bound, NormalizationEstimate, Rectangle};
use super::{delta_log10, log10_polynomial_factor};

/// How the maximum of the likelihood outside the core region is found.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Simulated annealing over `Γ̄_W`; any witness.
    GammaW,
    /// Convex maximization over `Γ̄_α`; linear witnesses only.
    GammaAlpha,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionAssignment {
    DetectedSet,
    FullStateSpace,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConfidenceParams {
    pub method: Method,
    pub eta: f64,
    pub mc_samples: u64,
    /// Annealing settings; the seed is derived from `seed` below.
    pub sa: SaParams,
    pub seed: u64,
    /// Number of independently seeded Monte Carlo work units.
    pub workers: usize,
    /// Multiple of the combined numerical error demanded as margin.
    pub error_multiplier: f64,
    /// Cap on root-finding iterations.
    pub max_bisection: usize,
    /// Target accuracy of the solved `log₁₀ ε`.
    pub resolution: f64,
}

impl Default for ConfidenceParams {
    fn default() -> Self {
        Self {
            method: Method::GammaW,
            eta: 1e5,
            mc_samples: 100_000,
            sa: SaParams::default(),
            seed: 0,
            workers: 8,
            error_multiplier: 10.0,
            max_bisection: 40,
            resolution: 0.01,
        }
    }
}

/// One evaluation of the `ε₂` bound.
#[derive(Clone, Debug, Serialize)]
pub struct BoundEvaluation {
    pub log10_epsilon: f64,
    pub delta: f64,
    /// Upper bound on `log₁₀ ε₂` (0 when `δ ≥ 1`).
    pub log10_bound: f64,
    /// Maximum log-likelihood outside the core region, when computed.
    pub max_log_likelihood: Option<f64>,
    /// Annealing spread in natural-log units.
    pub sa_spread: f64,
    /// `error_multiplier × (MC error + SA spread)` in base-10 units.
    pub margin_log10: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConfidenceReport {
    /// `C = −log₁₀ ε`; 0 for the full state space.
    pub confidence: f64,
    /// `ε`, which underflows to 0 for very large confidences.
    pub epsilon: f64,
    pub log10_epsilon: f64,
    pub delta: f64,
    pub log10_eps2_bound: f64,
    pub log10_c_nd: f64,
    pub region: RegionAssignment,
    pub method: Method,
    pub mle_log_likelihood: f64,
    pub witness_value_at_mle: f64,
    /// Monte Carlo standard error of the normalization, base-10 units.
    pub mc_standard_error: f64,
    /// Annealing spread over repeats, base-10 units.
    pub sa_spread: f64,
    pub margin_log10: f64,
    pub error_multiplier: f64,
    /// `n`, taken as the total number of recorded counts.
    pub total_counts: u64,
    pub dimension: usize,
    pub eta: f64,
    pub mc_samples: u64,
    pub mc_valid_fraction: f64,
    pub rectangle_recentered: bool,
    pub bisection_iterations: usize,
    pub diagnostic: Option<String>,
}

/// Everything that does not depend on `ε`: the maximum-likelihood state,
/// the rectangle and the normalization estimate.
pub struct Analysis<'a> {
    data: &'a ExperimentData,
    spec: &'a WitnessSpec,
    params: ConfidenceParams,
    pub n: u64,
    pub log10_c_nd: f64,
    pub mle: Maximum,
    pub rectangle: Rectangle,
    pub normalization: NormalizationEstimate,
    pub ln_volume: f64,
    pub witness_value_at_mle: f64,
}

impl<'a> Analysis<'a> {
    pub fn prepare(data: &'a ExperimentData, spec: &'a WitnessSpec, params: &ConfidenceParams) -> Result<Self> {
        if spec.dim() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                found: spec.dim(),
            });
        }
        if params.method == Method::GammaAlpha && spec.kind() != WitnessKind::Linear {
            return Err(Error::Unsupported("the Γ_α method needs a linear witness".into()));
        }
        if !(params.error_multiplier >= 0.0) || !(params.resolution > 0.0) || params.workers == 0 {
            return Err(Error::InvalidParameter("invalid confidence-solve parameters".into()));
        }
        params.sa.validate()?;
        let n = data.total_counts();
        let d = data.dim();
        let log10_c_nd = log10_polynomial_factor(n, d)?;
        let mle = likelihood::mle_certified(data, SolverOptions::default())?;
        let mut rectangle = build_rectangle_around(data, &mle.state, mle.log_likelihood, params.eta)?;
        let normalization = mc_normalization_lower_bound(
            data,
            &rectangle,
            params.mc_samples,
            rng::derive_seed(params.seed, 1),
            params.workers,
        )?;
        rectangle.f = Some(normalization.f);
        let witness_value_at_mle = witness::witness_value(spec, &mle.state)?;
        Ok(Self {
            data,
            spec,
            params: params.clone(),
            n,
            log10_c_nd,
            mle,
            rectangle,
            normalization,
            ln_volume: qstate::ln_hs_volume(d)?,
            witness_value_at_mle,
        })
    }

    pub fn params(&self) -> &ConfidenceParams {
        &self.params
    }

    fn sa_params(&self) -> SaParams {
        SaParams {
            seed: rng::derive_seed(self.params.seed, 2),
            ..self.params.sa.clone()
        }
    }

    /// Bound on `log₁₀ ε₂` for the `δ` belonging to `ε = 10^x`.
    pub fn evaluate(&self, log10_epsilon: f64) -> Result<BoundEvaluation> {
        let delta = delta_log10(self.n, self.data.dim(), log10_epsilon)?;
        let mut eval = self.evaluate_delta(delta)?;
        eval.log10_epsilon = log10_epsilon;
        Ok(eval)
    }

    /// Bound on `log₁₀ ε₂` for a given `δ`.
    pub fn evaluate_delta(&self, delta: f64) -> Result<BoundEvaluation> {
        let mc_error = self.normalization.standard_error;
        if delta >= 1.0 {
            return Ok(BoundEvaluation {
                log10_epsilon: f64::NAN,
                delta,
                log10_bound: 0.0,
                max_log_likelihood: None,
                sa_spread: 0.0,
                margin_log10: self.params.error_multiplier * mc_error / LN_10,
            });
        }
        let (max, sa_spread) = match self.params.method {
            Method::GammaAlpha => {
                let alpha = witness::alpha_threshold(self.spec, delta)?;
                let m = likelihood::constrained_maximum(self.data, self.spec, alpha, SolverOptions::default())?;
                (m.upper_bound, 0.0)
            }
            Method::GammaW => {
                let region = GammaWComplement::new(self.spec, delta);
                let res = anneal::sa_maximize_in(self.data, &region, &self.sa_params())?;
                (res.best_log_likelihood, res.spread)
            }
        };
        let ln_bound = max - self.normalization.log_value + self.ln_volume;
        Ok(BoundEvaluation {
            log10_epsilon: f64::NAN,
            delta,
            log10_bound: (ln_bound / LN_10).min(0.0),
            max_log_likelihood: Some(max),
            sa_spread,
            margin_log10: self.params.error_multiplier * (mc_error + sa_spread) / LN_10,
        })
    }

    /// Whether `ε₂·c_{n,d} ≤ ε` holds with the error margin.
    pub fn criterion_holds(&self, eval: &BoundEvaluation) -> bool {
        self.excess(eval) <= 0.0
    }

    fn report(&self, eval: &BoundEvaluation, detected: bool, iterations: usize) -> ConfidenceReport {
        let log10_epsilon = if detected { eval.log10_epsilon } else { 0.0 };
        ConfidenceReport {
            confidence: if detected { -eval.log10_epsilon } else { 0.0 },
            epsilon: 10f64.powf(log10_epsilon),
            log10_epsilon,
            delta: eval.delta,
            log10_eps2_bound: eval.log10_bound,
            log10_c_nd: self.log10_c_nd,
            region: if detected {
                RegionAssignment::DetectedSet
            } else {
                RegionAssignment::FullStateSpace
            },
            method: self.params.method,
            mle_log_likelihood: self.mle.log_likelihood,
            witness_value_at_mle: self.witness_value_at_mle,
            mc_standard_error: self.normalization.standard_error / LN_10,
            sa_spread: eval.sa_spread / LN_10,
            margin_log10: eval.margin_log10,
            error_multiplier: self.params.error_multiplier,
            total_counts: self.n,
            dimension: self.data.dim(),
            eta: self.params.eta,
            mc_samples: self.params.mc_samples,
            mc_valid_fraction: self.normalization.f,
            rectangle_recentered: self.rectangle.recentered,
            bisection_iterations: iterations,
            diagnostic: None,
        }
    }

    /// `log₁₀ ε₂ + log₁₀ c_{n,d} + margin − log₁₀ ε`; the criterion holds where
    /// this is nonpositive. It decreases with slope at most −1 in `log₁₀ ε`.
    pub fn excess(&self, eval: &BoundEvaluation) -> f64 {
        eval.log10_bound + self.log10_c_nd + eval.margin_log10 - eval.log10_epsilon
    }

    /// Most negative `log₁₀ ε` meeting the criterion, by Illinois-modified
    /// regula falsi on a bracket that always straddles the crossing.
    pub fn solve(&self) -> Result<ConfidenceReport> {
        let mut hi = 0.5f64.log10();
        let mut hi_eval = self.evaluate(hi)?;
        if !self.criterion_holds(&hi_eval) {
            return Ok(self.report(&hi_eval, false, 0));
        }
        let mut lo = -(self.log10_c_nd + hi_eval.log10_bound.abs() + 10.0);
        let lo_eval = self.evaluate(lo)?;
        if self.criterion_holds(&lo_eval) {
            return Ok(self.report(&lo_eval, true, 0));
        }
        let mut f_lo = self.excess(&lo_eval);
        let mut f_hi = self.excess(&hi_eval);
        let mut side = 0i8;
        let mut iterations = 0;
        // Since the slope is at most −1, `excess(hi) ≥ −resolution` puts `hi`
        // within `resolution` of the crossing.
        while iterations < self.params.max_bisection
            && hi - lo > self.params.resolution
            && f_hi < -self.params.resolution
        {
            iterations += 1;
            let secant = hi - f_hi * (hi - lo) / (f_hi - f_lo);
            let margin = 0.01 * self.params.resolution;
            let mid = if secant.is_finite() && secant > lo + margin && secant < hi - margin {
                secant
            } else {
                0.5 * (lo + hi)
            };
            let eval = self.evaluate(mid)?;
            let f_mid = self.excess(&eval);
            if f_mid <= 0.0 {
                hi = mid;
                hi_eval = eval;
                f_hi = f_mid;
                if side == 1 {
                    f_lo *= 0.5;
                }
                side = 1;
            } else {
                lo = mid;
                f_lo = f_mid;
                if side == -1 {
                    f_hi *= 0.5;
                }
                side = -1;
            }
        }
        Ok(self.report(&hi_eval, true, iterations))
    }

    /// Tests a single `ε = 10^x`.
    pub fn check(&self, log10_epsilon: f64) -> Result<ConfidenceReport> {
        let eval = self.evaluate(log10_epsilon)?;
        let holds = self.criterion_holds(&eval);
        Ok(self.report(&eval, holds, 0))
    }
}

/// Upper bound on `log₁₀ ε₂` at a given `δ`.
pub fn log10_eps2_upper_bound(
    data: &ExperimentData,
    spec: &WitnessSpec,
    delta: f64,
    params: &ConfidenceParams,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("δ = {delta} must be positive")));
    }
    if delta >= 1.0 {
        return Ok(0.0);
    }
    Ok(Analysis::prepare(data, spec, params)?.evaluate_delta(delta)?.log10_bound)
}

fn failure_report(data: &ExperimentData, params: &ConfidenceParams, err: &Error) -> ConfidenceReport {
    ConfidenceReport {
        confidence: 0.0,
        epsilon: 1.0,
        log10_epsilon: 0.0,
        delta: f64::NAN,
        log10_eps2_bound: 0.0,
        log10_c_nd: log10_polynomial_factor(data.total_counts().max(1), data.dim()).unwrap_or(f64::NAN),
        region: RegionAssignment::FullStateSpace,
        method: params.method,
        mle_log_likelihood: f64::NAN,
        witness_value_at_mle: f64::NAN,
        mc_standard_error: f64::NAN,
        sa_spread: f64::NAN,
        margin_log10: f64::NAN,
        error_multiplier: params.error_multiplier,
        total_counts: data.total_counts(),
        dimension: data.dim(),
        eta: params.eta,
        mc_samples: params.mc_samples,
        mc_valid_fraction: f64::NAN,
        rectangle_recentered: false,
        bisection_iterations: 0,
        diagnostic: Some(err.to_string()),
    }
}

/// Largest confidence for which the detected set can be assigned. Numerical
/// failures yield the full state space with a diagnostic.
pub fn solve_confidence(data: &ExperimentData, spec: &WitnessSpec, params: &ConfidenceParams) -> ConfidenceReport {
    match Analysis::prepare(data, spec, params).and_then(|a| a.solve()) {
        Ok(report) => report,
        Err(err) => failure_report(data, params, &err),
    }
}

/// Criterion at a single `ε = 10^x`.
pub fn check_epsilon(
    data: &ExperimentData,
    spec: &WitnessSpec,
    params: &ConfidenceParams,
    log10_epsilon: f64,
) -> ConfidenceReport {
    match Analysis::prepare(data, spec, params).and_then(|a| a.check(log10_epsilon)) {
        Ok(report) => report,
        Err(err) => failure_report(data, params, &err),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::{simulate_counts, Setting};
    use crate::qstate::{ops, DensityMatrix};

    fn synthetic(shots: u64, seed: u64) -> ExperimentData {
        let truth = DensityMatrix::mix(
            &DensityMatrix::pure(&ops::phi_state(1.89 * std::f64::consts::PI)).unwrap(),
            &DensityMatrix::maximally_mixed(4),
            1.0 - 1.0 / 42.0,
        )
        .unwrap();
        let settings: Vec<Setting> = ["xx", "yy", "zz"]
            .iter()
            .map(|a| Setting::pauli(a, &[0; 4]).unwrap())
            .collect();
        simulate_counts(&truth, &settings, shots, &mut rng::stream(seed)).unwrap()
    }

    fn quick(method: Method) -> ConfidenceParams {
        ConfidenceParams {
            method,
            mc_samples: 20_000,
            sa: SaParams {
                steps: 3_000,
                repeats: 3,
                ..SaParams::default()
            },
            ..ConfidenceParams::default()
        }
    }

    #[test]
    fn unit_delta_short_circuits() {
        let data = synthetic(6000, 1);
        let spec = WitnessSpec::phi_plus_linear();
        assert_eq!(log10_eps2_upper_bound(&data, &spec, 1.0, &quick(Method::GammaAlpha)).unwrap(), 0.0);
    }

    #[test]
    fn small_samples_give_zero_confidence() {
        let data = synthetic(150, 2);
        let report = solve_confidence(&data, &WitnessSpec::phi_plus_linear(), &quick(Method::GammaAlpha));
        assert_eq!(report.region, RegionAssignment::FullStateSpace);
        assert_eq!(report.confidence, 0.0);
    }

    #[test]
    fn detected_reports_satisfy_the_criterion() {
        let data = synthetic(6000, 3);
        let spec = WitnessSpec::phi_plus_linear();
        let report = solve_confidence(&data, &spec, &quick(Method::GammaAlpha));
        assert_eq!(report.region, RegionAssignment::DetectedSet, "{report:?}");
        assert!(report.confidence > 0.0);
        assert!(report.log10_eps2_bound + report.log10_c_nd <= -report.confidence);
    }

    #[test]
    fn gamma_alpha_needs_linear_witness() {
        let data = synthetic(6000, 4);
        let report = solve_confidence(&data, &WitnessSpec::phi_plus_nonlinear(), &quick(Method::GammaAlpha));
        assert_eq!(report.region, RegionAssignment::FullStateSpace);
        assert!(report.diagnostic.is_some());
    }
}
