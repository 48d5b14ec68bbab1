use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::qstate::DensityMatrix;

use super::WitnessSpec;

/// Target width of the bracket returned for nonlinear witnesses.
pub const FIDELITY_TOL: f64 = 1e-7;

const MAX_CUTS: usize = 200;
const RESTORE_STEPS: usize = 60;
const U_MIN: f64 = 1e-200;

/// Certified bounds on `max F(σ, σ′)` over undetected states `σ′`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FidelityBracket {
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
}

impl FidelityBracket {
    fn exact(value: f64) -> Self {
        Self {
            lower: value,
            upper: value,
            iterations: 0,
        }
    }
}

/// `max Σ_j √(p_j q_j)` over probability vectors `q` with `Σ_j q_j w_j ≥ 0`.
/// Returns `None` when the constraint set is empty.
pub(crate) fn bhattacharyya_halfspace(p: &[f64], w: &[f64]) -> Option<(f64, Vec<f64>)> {
    let n = p.len();
    let mean: f64 = p.iter().zip(w).map(|(a, b)| a * b).sum();
    if mean >= 0.0 {
        return Some((p.iter().sum::<f64>().min(1.0), p.to_vec()));
    }
    let (top, &w_top) = w.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    if w_top < 0.0 {
        return None;
    }
    if w_top == 0.0 {
        let mass: f64 = (0..n).filter(|&j| w[j] >= 0.0).map(|j| p[j]).sum();
        let q = (0..n)
            .map(|j| match (w[j] >= 0.0, mass > 0.0) {
                (false, _) => 0.0,
                (true, true) => p[j] / mass,
                (true, false) => f64::from(j == top),
            })
            .collect();
        return Some((mass.sqrt(), q));
    }
    // Stationary points are q_j ∝ p_j / (1 − t w_j)²; with u = 1 − t w_top the
    // denominators are e_j(u) = (w_top − w_j + u w_j) / w_top, and
    // h(u) = Σ p_j w_j / e_j² increases as u decreases from 1.
    let e = |j: usize, u: f64| (w_top - w[j] + u * w[j]) / w_top;
    let h = |u: f64| -> f64 {
        (0..n)
            .filter(|&j| p[j] > 0.0)
            .map(|j| p[j] * w[j] / e(j, u).powi(2))
            .sum()
    };
    let finish = |u: f64, extra_top: f64| {
        let mut q: Vec<f64> = (0..n)
            .map(|j| if p[j] > 0.0 { p[j] / e(j, u).powi(2) } else { 0.0 })
            .collect();
        let s1: f64 = (0..n).filter(|&j| p[j] > 0.0).map(|j| p[j] / e(j, u)).sum();
        q[top] += extra_top;
        let z: f64 = q.iter().sum();
        let value = s1 / z.sqrt();
        q.iter_mut().for_each(|x| *x /= z);
        (value.min(1.0), q)
    };
    if h(U_MIN) >= 0.0 {
        let (mut lo, mut hi) = (U_MIN.ln(), 0.0f64);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if h(mid.exp()) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Some(finish((0.5 * (lo + hi)).exp(), 0.0));
    }
    // No interior root: the top eigenspace is unpopulated and absorbs the
    // mass needed to meet the constraint with equality.
    let s2: f64 = (0..n).filter(|&j| p[j] > 0.0).map(|j| p[j] / e(j, 0.0).powi(2)).sum();
    let h_top = h(0.0);
    let a = 1.0 / (s2 - h_top / w_top);
    let m = -a * h_top / w_top;
    Some(finish(0.0, m / a))
}

/// Exact solution of the fidelity program for the half space `tr(σ′W) ≥ 0`
/// given the spectrum of `W`. Returns the optimal value and, on request, a
/// maximizing state.
pub(crate) fn linear_program(
    sigma: &CMatrix,
    values: &[f64],
    vectors: &CMatrix,
    want_maximizer: bool,
) -> Option<(f64, Option<CMatrix>)> {
    let n = values.len();
    let p: Vec<f64> = (0..n)
        .map(|j| {
            let v = vectors.column(j);
            let sv = sigma * v;
            v.dotc(&sv).re.max(0.0)
        })
        .collect();
    let (value, q) = bhattacharyya_halfspace(&p, values)?;
    if !want_maximizer {
        return Some((value, None));
    }
    let floor = 1e-14;
    let k_diag: Vec<f64> = (0..n)
        .map(|j| if p[j] > floor { (q[j] / p[j]).sqrt() } else { 0.0 })
        .collect();
    let k = linalg::from_spectrum(&k_diag, vectors);
    let mut rho = &k * sigma * &k;
    let loose: Vec<f64> = (0..n).map(|j| if p[j] > floor { 0.0 } else { q[j] }).collect();
    rho += linalg::from_spectrum(&loose, vectors);
    let rho = linalg::hermitian_part(&rho);
    let tr = linalg::trace(&rho).re;
    Some((value, Some(rho.unscale(tr))))
}

struct RootFidelity {
    root: CMatrix,
}

impl RootFidelity {
    fn new(sigma: &CMatrix) -> Self {
        Self {
            root: linalg::psd_sqrt(sigma),
        }
    }

    fn eval(&self, rho: &CMatrix) -> f64 {
        let inner = &self.root * rho * &self.root;
        let f: f64 = linalg::eigenvalues(&inner).iter().map(|v| v.max(0.0).sqrt()).sum();
        f.clamp(0.0, 1.0)
    }
}

/// Bounds on `max F(σ, σ′)` over states `σ′` not detected by the witness.
///
/// Linear witnesses are solved in closed form (`lower == upper`). Nonlinear
/// witnesses are handled by supporting-hyperplane cuts of the concave witness
/// value at feasible boundary points; each cut gives an exact upper bound and
/// each boundary point a feasible lower bound. When `decision` is given the
/// search stops as soon as the bracket lies on one side of it.
pub fn max_fidelity_to_undetected(
    sigma: &DensityMatrix,
    spec: &WitnessSpec,
    decision: Option<f64>,
) -> Result<FidelityBracket> {
    if sigma.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: sigma.dim(),
        });
    }
    let s = sigma.matrix();
    let (values, vectors) = spec.w_spectrum();
    if spec.u().is_none() {
        let (value, _) = linear_program(s, values, vectors, false)
            .ok_or_else(|| Error::InvalidWitness("no undetected state exists".into()))?;
        return Ok(FidelityBracket::exact(value));
    }
    if spec.value_of(s) >= 0.0 {
        return Ok(FidelityBracket::exact(1.0));
    }
    let d = spec.dim();
    let anchor = linalg::identity(d).unscale(d as f64);
    if spec.value_of(&anchor) < 0.0 {
        return Err(Error::InvalidWitness("the maximally mixed state is detected".into()));
    }
    let (mut upper, point) = linear_program(s, values, vectors, true)
        .ok_or_else(|| Error::InvalidWitness("no undetected state exists".into()))?;
    let decided = |lo: f64, hi: f64| match decision {
        Some(t) => lo >= t || hi < t,
        None => false,
    };
    // States undetected by w_∞ are undetected by W, so the linear value
    // already bounds the program from above.
    if decided(0.0, upper) {
        return Ok(FidelityBracket {
            lower: 0.0,
            upper,
            iterations: 0,
        });
    }
    let fid = RootFidelity::new(s);
    let mut point = point.expect("maximizer requested");
    let mut lower = fid.eval(&anchor);
    for it in 1..=MAX_CUTS {
        let boundary = restore(spec, &anchor, &point);
        lower = lower.max(fid.eval(&boundary));
        if upper - lower <= FIDELITY_TOL || decided(lower, upper) {
            return Ok(FidelityBracket {
                lower,
                upper: upper.max(lower),
                iterations: it,
            });
        }
        let g = spec.gradient_of(&boundary);
        let offset = linalg::inner(&g, &boundary) - spec.value_of(&boundary);
        let cut = g - linalg::identity(d).scale(offset);
        let (cut_values, cut_vectors) = linalg::hermitian_eigen(&cut);
        let Some((ub, next)) = linear_program(s, &cut_values, &cut_vectors, true) else {
            break;
        };
        upper = upper.min(ub);
        point = next.expect("maximizer requested");
    }
    if upper - lower <= FIDELITY_TOL || decided(lower, upper) {
        return Ok(FidelityBracket {
            lower,
            upper,
            iterations: MAX_CUTS,
        });
    }
    Err(Error::NonConvergence {
        solver: "nonlinear fidelity program",
        iterations: MAX_CUTS,
        best_value: upper,
    })
}

/// Furthest point on the segment from `anchor` (undetected) towards `target`
/// that is still undetected.
fn restore(spec: &WitnessSpec, anchor: &CMatrix, target: &CMatrix) -> CMatrix {
    let value = spec.along_segment(anchor, target);
    if value(1.0) >= 0.0 {
        return target.clone();
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..RESTORE_STEPS {
        let mid = 0.5 * (lo + hi);
        if value(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    anchor.scale(1.0 - lo) + target.scale(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{ops, sample_hs_state};
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    /// Dense grid search of the classical program for small `n`.
    fn grid_oracle(p: &[f64], w: &[f64], steps: usize) -> f64 {
        let mut best: f64 = -1.0;
        let n = p.len();
        let mut idx = vec![0usize; n - 1];
        loop {
            let used: usize = idx.iter().sum();
            if used <= steps {
                let mut q: Vec<f64> = idx.iter().map(|&k| k as f64 / steps as f64).collect();
                q.push((steps - used) as f64 / steps as f64);
                if q.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() >= 0.0 {
                    best = best.max(p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).sum());
                }
            }
            let mut k = 0;
            loop {
                if k == n - 1 {
                    return best;
                }
                idx[k] += 1;
                if idx[k] <= steps {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn classical_solution_matches_grid_search() {
        let mut r = rng::stream(11);
        for _ in 0..30 {
            let raw: Vec<f64> = (0..3).map(|_| r.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let w: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
            let oracle = grid_oracle(&p, &w, 400);
            match bhattacharyya_halfspace(&p, &w) {
                Some((v, q)) => {
                    assert!(v >= oracle - 1e-12, "{v} < {oracle}");
                    assert!(v - oracle < 5e-3, "{v} vs {oracle}");
                    assert_abs_diff_eq!(q.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
                    assert!(q.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() >= -1e-9);
                    let attained: f64 = p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).sum();
                    assert_abs_diff_eq!(attained, v, epsilon = 1e-9);
                }
                None => assert!(w.iter().all(|&x| x < 0.0)),
            }
        }
    }

    #[test]
    fn classical_boundary_case_uses_empty_top_direction() {
        // p has no weight where w is largest, and no interior root exists.
        let p = [0.9, 0.1, 0.0];
        let w = [-1.0, 0.2, 0.5];
        let (v, q) = bhattacharyya_halfspace(&p, &w).unwrap();
        assert!(q[2] > 0.0);
        assert_abs_diff_eq!(v, grid_oracle(&p, &w, 2000), epsilon = 2e-3);
        assert_abs_diff_eq!(q.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn phi_plus_linear_has_closed_form() {
        // Werner states are diagonal in the eigenbasis of W = 𝟙/2 − |Φ⁺⟩⟨Φ⁺|;
        // with tr(σW) = −x < 0 the optimum is F² = 1/2 + √(1/4 − x²).
        let spec = WitnessSpec::phi_plus_linear();
        for p in [0.0, 0.2, 0.5] {
            let sigma = DensityMatrix::mix(
                &DensityMatrix::pure(&ops::phi_plus()).unwrap(),
                &DensityMatrix::maximally_mixed(4),
                1.0 - p,
            )
            .unwrap();
            let x = -linalg::inner(sigma.matrix(), spec.w());
            let b = max_fidelity_to_undetected(&sigma, &spec, None).unwrap();
            assert_eq!(b.lower, b.upper);
            assert_abs_diff_eq!(b.upper, (0.5 + (0.25 - x * x).max(0.0).sqrt()).sqrt(), epsilon = 1e-10);
        }
    }

    #[test]
    fn linear_maximizer_is_feasible_and_attains_value() {
        let spec = WitnessSpec::phi_plus_linear();
        let (values, vectors) = spec.w_spectrum();
        let mut r = rng::stream(3);
        for _ in 0..20 {
            let sigma = sample_hs_state(4, &mut r).unwrap();
            let (v, rho) = linear_program(sigma.matrix(), values, vectors, true).unwrap();
            let rho = DensityMatrix::new_clipped(rho.unwrap()).unwrap();
            assert!(linalg::inner(rho.matrix(), spec.w()) >= -1e-9);
            let f = crate::qstate::fidelity(&sigma, &rho).unwrap();
            assert_abs_diff_eq!(f, v, epsilon = 1e-7);
        }
    }

    #[test]
    fn nonlinear_bracket_dominates_sampled_feasible_states() {
        let spec = WitnessSpec::phi_plus_nonlinear();
        let mut r = rng::stream(8);
        let sigma = DensityMatrix::mix(
            &DensityMatrix::pure(&ops::phi_state(1.89 * std::f64::consts::PI)).unwrap(),
            &DensityMatrix::maximally_mixed(4),
            0.9,
        )
        .unwrap();
        let b = max_fidelity_to_undetected(&sigma, &spec, None).unwrap();
        assert!(b.upper - b.lower <= FIDELITY_TOL);
        let lin = max_fidelity_to_undetected(&sigma, &WitnessSpec::phi_plus_linear(), None).unwrap();
        assert!(b.upper <= lin.upper + 1e-12);
        for _ in 0..3000 {
            let rho = sample_hs_state(4, &mut r).unwrap();
            if spec.value_of(rho.matrix()) >= 0.0 {
                assert!(crate::qstate::fidelity(&sigma, &rho).unwrap() <= b.upper + 1e-9);
            }
        }
    }

    #[test]
    fn undetected_states_have_unit_fidelity() {
        let spec = WitnessSpec::phi_plus_nonlinear();
        let b = max_fidelity_to_undetected(&DensityMatrix::maximally_mixed(4), &spec, None).unwrap();
        assert_eq!((b.lower, b.upper), (1.0, 1.0));
    }
}
