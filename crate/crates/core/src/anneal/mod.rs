//! Simulated annealing of the log-likelihood over a black-box region, with
//! the walk carried out on purifications.

mod region;

pub use region::{GammaAlphaComplement, GammaWComplement, Region, Unconstrained};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::likelihood::{self, ExperimentData};
use crate::linalg;
use crate::qstate::{self, DensityMatrix};
use crate::rng;
use crate::witness::WitnessSpec;

const START_ATTEMPTS: usize = 10_000;
const PROPOSAL_ATTEMPTS: usize = 1_000;
const ADAPT_WINDOW: usize = 50;
const ADAPT_FACTOR: f64 = 1.1;
const T0_SAMPLES: usize = 100;
const T0_FACTOR: f64 = 3.0;

#[derive(Clone, Debug, Serialize)]
pub struct SaParams {
    /// Initial temperature; `None` picks three times the log-likelihood
    /// standard deviation over feasible random states.
    pub t0: Option<f64>,
    pub step0: f64,
    pub steps: usize,
    pub target_acceptance: f64,
    pub repeats: usize,
    pub seed: u64,
    /// Keep every k-th step in the trajectory (0 keeps none).
    pub record_every: usize,
}

impl Default for SaParams {
    fn default() -> Self {
        Self {
            t0: None,
            step0: 0.1,
            steps: 100_000,
            target_acceptance: 0.3,
            repeats: 5,
            seed: 0,
            record_every: 0,
        }
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.repeats == 0 {
            return Err(Error::InvalidParameter("steps and repeats must be at least 1".into()));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::InvalidParameter("target acceptance must lie in (0, 1)".into()));
        }
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return Err(Error::InvalidParameter("initial step must be positive".into()));
        }
        if let Some(t0) = self.t0 {
            if !(t0 > 0.0 && t0.is_finite()) {
                return Err(Error::InvalidParameter("initial temperature must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub temperature: f64,
    pub log_likelihood: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug)]
pub struct SaRun {
    pub best_log_likelihood: f64,
    pub best_state: DensityMatrix,
    pub acceptance_rate: f64,
    pub final_step: f64,
    pub trajectory: Vec<TrajectoryPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AcceptanceSummary {
    pub mean_rate: f64,
    pub min_rate: f64,
    pub max_rate: f64,
    pub mean_final_step: f64,
}

#[derive(Clone, Debug)]
pub struct SaResult {
    pub best_log_likelihood: f64,
    pub best_state: DensityMatrix,
    pub per_repeat_values: Vec<f64>,
    /// Sample standard deviation of the per-repeat maxima (0 for one repeat).
    pub spread: f64,
    pub t0: f64,
    pub acceptance: AcceptanceSummary,
    pub runs: Vec<SaRun>,
}

/// Generator of a move: `H_kl` on the purification index set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoveKind {
    /// `|k⟩⟨l| + |l⟩⟨k|` for `k < l`
    Symmetric,
    /// `−i|k⟩⟨l| + i|l⟩⟨k|` for `k > l`
    Antisymmetric,
    /// `|k⟩⟨k| − |k+1⟩⟨k+1|`, indices cyclic
    Diagonal,
}

impl MoveKind {
    pub fn of(k: usize, l: usize) -> Self {
        match k.cmp(&l) {
            std::cmp::Ordering::Less => MoveKind::Symmetric,
            std::cmp::Ordering::Greater => MoveKind::Antisymmetric,
            std::cmp::Ordering::Equal => MoveKind::Diagonal,
        }
    }
}

/// `exp(i g H_kl)|ψ⟩`, applied as an exact two-level rotation.
pub fn apply_move(psi: &[Complex64], k: usize, l: usize, g: f64) -> Vec<Complex64> {
    let mut out = psi.to_vec();
    let (s, c) = g.sin_cos();
    let i = linalg::I;
    match MoveKind::of(k, l) {
        MoveKind::Symmetric => {
            out[k] = psi[k] * c + i * s * psi[l];
            out[l] = psi[l] * c + i * s * psi[k];
        }
        MoveKind::Antisymmetric => {
            out[k] = psi[k] * c + psi[l] * s;
            out[l] = psi[l] * c - psi[k] * s;
        }
        MoveKind::Diagonal => {
            let m = (k + 1) % psi.len();
            out[k] = psi[k] * Complex64::from_polar(1.0, g);
            out[m] = psi[m] * Complex64::from_polar(1.0, -g);
        }
    }
    let norm = linalg::vector_norm(&out);
    out.iter_mut().for_each(|z| *z /= norm);
    out
}

/// Random move with `k, l` uniform over the purification indices and a
/// rotation angle `g ~ N(0, step)`.
pub fn propose_move<R: Rng + ?Sized>(psi: &[Complex64], step: f64, rng: &mut R) -> Vec<Complex64> {
    let n = psi.len();
    let k = rng.random_range(0..n);
    let l = rng.random_range(0..n);
    let g = Normal::new(0.0, step).map(|d| d.sample(rng)).unwrap_or(0.0);
    apply_move(psi, k, l, g)
}

fn state_of(psi: &[Complex64], d: usize) -> DensityMatrix {
    qstate::reduce_purification(psi, d).expect("purification has length d²")
}

/// Maximum of the log-likelihood over `Γ̄_W` for the given witness and `δ`.
pub fn sa_maximize(data: &ExperimentData, spec: &WitnessSpec, delta: f64, params: &SaParams) -> Result<SaResult> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("δ = {delta} outside (0, 1)")));
    }
    sa_maximize_in(data, &GammaWComplement::new(spec, delta), params)
}

/// Maximum of the log-likelihood over an arbitrary region.
pub fn sa_maximize_in(data: &ExperimentData, region: &dyn Region, params: &SaParams) -> Result<SaResult> {
    params.validate()?;
    let t0 = match params.t0 {
        Some(t) => t,
        None => default_temperature(data, region, params.seed)?,
    };
    let runs: Vec<SaRun> = (0..params.repeats)
        .into_par_iter()
        .map(|r| anneal_once(data, region, params, t0, rng::substream(params.seed, r as u64)))
        .collect::<Result<_>>()?;
    let per_repeat_values: Vec<f64> = runs.iter().map(|r| r.best_log_likelihood).collect();
    let best_index = (0..runs.len())
        .max_by(|&a, &b| per_repeat_values[a].total_cmp(&per_repeat_values[b]))
        .expect("at least one repeat");
    let best_state = runs[best_index].best_state.clone();
    if !region.contains(&best_state)? {
        return Err(Error::InvalidParameter("annealing best state left the region".into()));
    }
    let rates: Vec<f64> = runs.iter().map(|r| r.acceptance_rate).collect();
    let k = runs.len() as f64;
    Ok(SaResult {
        best_log_likelihood: per_repeat_values[best_index],
        best_state,
        spread: sample_std(&per_repeat_values),
        per_repeat_values,
        t0,
        acceptance: AcceptanceSummary {
            mean_rate: rates.iter().sum::<f64>() / k,
            min_rate: rates.iter().copied().fold(f64::INFINITY, f64::min),
            max_rate: rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_final_step: runs.iter().map(|r| r.final_step).sum::<f64>() / k,
        },
        runs,
    })
}

pub(crate) fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Three times the standard deviation of `log ℒ` over feasible random states.
fn default_temperature(data: &ExperimentData, region: &dyn Region, seed: u64) -> Result<f64> {
    let d = data.dim();
    let mut r = rng::substream(seed, u64::MAX);
    let mut values = Vec::with_capacity(T0_SAMPLES);
    let mut attempts = 0;
    while values.len() < T0_SAMPLES && attempts < START_ATTEMPTS {
        attempts += 1;
        let sigma = qstate::sample_hs_state(d, &mut r)?;
        if region.contains(&sigma)? {
            let v = likelihood::log_likelihood(data, &sigma)?;
            if v.is_finite() {
                values.push(v);
            }
        }
    }
    let t0 = T0_FACTOR * sample_std(&values);
    Ok(if t0 > 0.0 && t0.is_finite() { t0 } else { 1.0 })
}

fn anneal_once(
    data: &ExperimentData,
    region: &dyn Region,
    params: &SaParams,
    t0: f64,
    mut r: rng::Stream,
) -> Result<SaRun> {
    let d = data.dim();
    let mut psi = None;
    for _ in 0..START_ATTEMPTS {
        let candidate = qstate::sample_purification(d, &mut r);
        if region.contains(&state_of(&candidate, d))? {
            psi = Some(candidate);
            break;
        }
    }
    let mut psi = psi.ok_or(Error::InfeasibleRegion(START_ATTEMPTS))?;
    let mut current = likelihood::log_likelihood(data, &state_of(&psi, d))?;
    let mut best = current;
    let mut best_psi = psi.clone();
    let mut step = params.step0;
    let mut window_accepted = 0usize;
    let mut total_accepted = 0usize;
    let mut trajectory = Vec::new();
    for s in 1..=params.steps {
        let temperature = t0 / s as f64;
        let mut proposal = None;
        for _ in 0..PROPOSAL_ATTEMPTS {
            let candidate = propose_move(&psi, step, &mut r);
            let sigma = state_of(&candidate, d);
            if region.contains(&sigma)? {
                proposal = Some((candidate, likelihood::log_likelihood(data, &sigma)?));
                break;
            }
        }
        let mut accepted = false;
        if let Some((candidate, value)) = proposal {
            let rise = value - current;
            accepted = if rise >= 0.0 {
                true
            } else if rise.is_finite() || current.is_infinite() {
                r.random::<f64>() < (rise / temperature).exp()
            } else {
                false
            };
            if accepted {
                psi = candidate;
                current = value;
                if current > best {
                    best = current;
                    best_psi = psi.clone();
                }
            }
        }
        if accepted {
            window_accepted += 1;
            total_accepted += 1;
        }
        if s % ADAPT_WINDOW == 0 {
            let rate = window_accepted as f64 / ADAPT_WINDOW as f64;
            if rate > params.target_acceptance {
                step *= ADAPT_FACTOR;
            } else {
                step /= ADAPT_FACTOR;
            }
            window_accepted = 0;
        }
        if params.record_every > 0 && s % params.record_every == 0 {
            trajectory.push(TrajectoryPoint {
                step: s,
                temperature,
                log_likelihood: current,
                accepted,
            });
        }
    }
    Ok(SaRun {
        best_log_likelihood: best,
        best_state: state_of(&best_psi, d),
        acceptance_rate: total_accepted as f64 / params.steps as f64,
        final_step: step,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::{mle, Setting};
    use crate::qstate::ops;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_angle_is_identity() {
        let mut r = rng::stream(1);
        let psi = qstate::sample_purification(2, &mut r);
        for (k, l) in [(0, 1), (2, 0), (3, 3)] {
            let out = apply_move(&psi, k, l, 0.0);
            for (a, b) in psi.iter().zip(&out) {
                assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn moves_match_matrix_exponentials() {
        let n = 4;
        let mut r = rng::stream(2);
        let psi = qstate::sample_purification(2, &mut r);
        let g = 0.37;
        for (k, l) in [(0, 2), (3, 1), (3, 3), (1, 1)] {
            let mut h = linalg::CMatrix::zeros(n, n);
            match MoveKind::of(k, l) {
                MoveKind::Symmetric => {
                    h[(k, l)] = linalg::ONE;
                    h[(l, k)] = linalg::ONE;
                }
                MoveKind::Antisymmetric => {
                    h[(k, l)] = linalg::c(0.0, -1.0);
                    h[(l, k)] = linalg::c(0.0, 1.0);
                }
                MoveKind::Diagonal => {
                    h[(k, k)] = linalg::ONE;
                    h[((k + 1) % n, (k + 1) % n)] = linalg::c(-1.0, 0.0);
                }
            }
            // exp(igH) through the spectral decomposition of H.
            let (vals, vecs) = linalg::hermitian_eigen(&h);
            let mut u = linalg::CMatrix::zeros(n, n);
            for (j, lam) in vals.iter().enumerate() {
                let v = vecs.column(j);
                u += (v * v.adjoint()) * Complex64::from_polar(1.0, g * lam);
            }
            let expected = &u * nalgebra::DVector::from_vec(psi.clone());
            let got = apply_move(&psi, k, l, g);
            for (a, b) in expected.iter().zip(&got) {
                assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn proposals_preserve_norm() {
        let mut r = rng::stream(3);
        let mut psi = qstate::sample_purification(4, &mut r);
        for _ in 0..10_000 {
            psi = propose_move(&psi, 0.3, &mut r);
            assert!((linalg::vector_norm(&psi) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unconstrained_reaches_mle() {
        let data = ExperimentData::new(
            2,
            vec![
                Setting::pauli("x", &[30, 20]).unwrap(),
                Setting::pauli("y", &[26, 24]).unwrap(),
                Setting::pauli("z", &[40, 10]).unwrap(),
            ],
        )
        .unwrap();
        let params = SaParams {
            steps: 5_000,
            repeats: 3,
            seed: 4,
            ..SaParams::default()
        };
        let res = sa_maximize_in(&data, &Unconstrained, &params).unwrap();
        let (_, max) = mle(&data).unwrap();
        assert!(res.best_log_likelihood <= max + 1e-7);
        assert!((res.best_log_likelihood - max).abs() <= 0.02 * max.abs());
        assert_eq!(res.per_repeat_values.len(), 3);
        let again = sa_maximize_in(&data, &Unconstrained, &params).unwrap();
        assert_eq!(res.per_repeat_values, again.per_repeat_values);
    }

    #[test]
    fn infeasible_region_is_reported() {
        struct Nowhere;
        impl Region for Nowhere {
            fn contains(&self, _: &DensityMatrix) -> Result<bool> {
                Ok(false)
            }
        }
        let data = ExperimentData::new(2, vec![Setting::pauli("z", &[1, 1]).unwrap()]).unwrap();
        let params = SaParams {
            t0: Some(1.0),
            steps: 10,
            repeats: 1,
            ..SaParams::default()
        };
        assert!(matches!(
            sa_maximize_in(&data, &Nowhere, &params),
            Err(Error::InfeasibleRegion(_))
        ));
    }

    #[test]
    fn witness_region_walk_stays_inside() {
        let spec = WitnessSpec::phi_plus_linear();
        let truth = DensityMatrix::pure(&ops::phi_plus()).unwrap();
        let settings: Vec<Setting> = ["xx", "yy", "zz"]
            .iter()
            .map(|a| Setting::pauli(a, &[0; 4]).unwrap())
            .collect();
        let data = likelihood::simulate_counts(&truth, &settings, 300, &mut rng::stream(5)).unwrap();
        let params = SaParams {
            steps: 2_000,
            repeats: 2,
            seed: 6,
            record_every: 100,
            ..SaParams::default()
        };
        let res = sa_maximize(&data, &spec, 0.2, &params).unwrap();
        assert!(crate::witness::in_gamma_w_complement(&res.best_state, &spec, 0.2).unwrap());
        for run in &res.runs {
            assert_eq!(run.trajectory.len(), 20);
        }
    }
}
