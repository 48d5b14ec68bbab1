use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::qstate::DensityMatrix;
use crate::witness::{WitnessKind, WitnessSpec};

use super::{gradient_of, log_likelihood_of, ExperimentData};

/// Convergence controls shared by the unconstrained and constrained solvers.
#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Stop once the gradient-mapping norm falls below this.
    pub gradient_tol: f64,
    /// Stop once the best value improves by less than this over `stall_window` iterations.
    pub stall_tol: f64,
    pub stall_window: usize,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gradient_tol: 1e-8,
            stall_tol: 1e-12,
            stall_window: 50,
            max_iterations: 100_000,
        }
    }
}

/// A likelihood maximum with a certified upper bound on the true optimum.
#[derive(Clone, Debug)]
pub struct Maximum {
    pub state: DensityMatrix,
    pub log_likelihood: f64,
    /// `log_likelihood` plus the Frank-Wolfe duality gap.
    pub upper_bound: f64,
    pub iterations: usize,
}

/// Maximum-likelihood state and its log-likelihood.
pub fn mle(data: &ExperimentData) -> Result<(DensityMatrix, f64)> {
    let m = mle_certified(data, SolverOptions::default())?;
    Ok((m.state, m.log_likelihood))
}

pub fn mle_certified(data: &ExperimentData, options: SolverOptions) -> Result<Maximum> {
    maximize(data, None, options)
}

/// Maximum of the log-likelihood over states with `tr(σW) ≥ −α`.
pub fn max_loglik_over_gamma_alpha_complement(data: &ExperimentData, spec: &WitnessSpec, alpha: f64) -> Result<f64> {
    Ok(constrained_maximum(data, spec, alpha, SolverOptions::default())?.log_likelihood)
}

pub fn constrained_maximum(
    data: &ExperimentData,
    spec: &WitnessSpec,
    alpha: f64,
    options: SolverOptions,
) -> Result<Maximum> {
    if spec.kind() != WitnessKind::Linear {
        return Err(Error::Unsupported("the Γ_α constraint needs a linear witness".into()));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("α = {alpha} must be positive")));
    }
    if spec.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            found: spec.dim(),
        });
    }
    maximize(data, Some(Halfspace { w: spec.w(), alpha }), options)
}

/// `{Y : tr(YW) ≥ −α}`
#[derive(Clone, Copy)]
struct Halfspace<'a> {
    w: &'a CMatrix,
    alpha: f64,
}

impl Halfspace<'_> {
    fn holds(&self, y: &CMatrix) -> bool {
        linalg::inner(y, self.w) >= -self.alpha
    }

    /// Frobenius projection onto the density matrices inside the half space:
    /// `P_D(X + μW)` with the smallest `μ ≥ 0` meeting the constraint.
    fn project(&self, x: &CMatrix) -> CMatrix {
        let y = linalg::project_density(x);
        if self.holds(&y) {
            return y;
        }
        let at = |mu: f64| linalg::project_density(&(x + self.w.scale(mu)));
        let mut hi = 1.0;
        let mut y_hi = at(hi);
        for _ in 0..200 {
            if self.holds(&y_hi) {
                break;
            }
            hi *= 2.0;
            y_hi = at(hi);
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let y_mid = at(mid);
            if self.holds(&y_mid) {
                hi = mid;
                y_hi = y_mid;
            } else {
                lo = mid;
            }
        }
        y_hi
    }

    /// `min_{μ≥0} λ_max(G + μW) + μα`, the support function of the feasible
    /// set in direction `G` (every evaluated `μ` gives a valid upper bound).
    fn support(&self, g: &CMatrix) -> f64 {
        let h = |mu: f64| linalg::eigenvalues(&(g + self.w.scale(mu))).last().copied().unwrap() + mu * self.alpha;
        let eg = linalg::eigenvalues(g);
        let ew = linalg::eigenvalues(self.w);
        let span = eg[eg.len() - 1] - eg[0];
        let denom = ew[ew.len() - 1] + self.alpha;
        let mut best = h(0.0);
        if span <= 0.0 || denom <= 0.0 {
            return best;
        }
        let (mut a, mut b) = (0.0, span / denom);
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let (mut hc, mut hd) = (h(c), h(d));
        for _ in 0..120 {
            best = best.min(hc).min(hd);
            if hc < hd {
                b = d;
                d = c;
                hd = hc;
                c = b - ratio * (b - a);
                hc = h(c);
            } else {
                a = c;
                c = d;
                hc = hd;
                d = a + ratio * (b - a);
                hd = h(d);
            }
        }
        best.min(hc).min(hd)
    }
}

fn project(x: &CMatrix, constraint: Option<Halfspace>) -> CMatrix {
    match constraint {
        None => linalg::project_density(x),
        Some(c) => c.project(x),
    }
}

/// Upper bound on the maximum from concavity: `f(X) + max_Y ⟨G, Y − X⟩`.
fn certified_upper(f: f64, g: &CMatrix, x: &CMatrix, constraint: Option<Halfspace>) -> f64 {
    let support = match constraint {
        None => *linalg::eigenvalues(g).last().unwrap(),
        Some(c) => c.support(g),
    };
    f + (support - linalg::inner(g, x)).max(0.0)
}

/// `f(b) − f(a)` without cancellation: `Σ n_k ln(1 + (p_k(b) − p_k(a))/p_k(a))`.
fn log_likelihood_change(data: &ExperimentData, a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = b - a;
    let mut total = 0.0;
    for o in data.outcomes() {
        if o.count == 0 {
            continue;
        }
        let pa = linalg::inner(a, &o.effect);
        let pb = linalg::inner(b, &o.effect);
        if !(pb > 0.0) {
            return f64::NEG_INFINITY;
        }
        total += o.count as f64 * (linalg::inner(&diff, &o.effect) / pa).ln_1p();
    }
    total
}

/// Accelerated projected gradient ascent with backtracking and
/// function-value restarts, started from `𝟙/d`.
fn maximize(data: &ExperimentData, constraint: Option<Halfspace>, options: SolverOptions) -> Result<Maximum> {
    let d = data.dim();
    let f = |m: &CMatrix| log_likelihood_of(data, m);
    let mut x = project(&linalg::identity(d).unscale(d as f64), constraint);
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(Error::NonConvergence {
            solver: "likelihood ascent",
            iterations: 0,
            best_value: fx,
        });
    }
    let finish = |x: CMatrix, fx: f64, iterations: usize| -> Result<Maximum> {
        let g = gradient_of(data, &x).expect("finite likelihood");
        let upper_bound = certified_upper(fx, &g, &x, constraint);
        Ok(Maximum {
            state: DensityMatrix::new_clipped(x)?,
            log_likelihood: fx,
            upper_bound,
            iterations,
        })
    };
    let g0 = gradient_of(data, &x).expect("finite likelihood");
    let mut step = 1.0 / linalg::frobenius_norm(&g0).max(1.0);
    let mut y = x.clone();
    let mut theta: f64 = 1.0;
    // Cumulative gain of f(x) over the start, accumulated from exact differences.
    let mut gain = 0.0;
    let mut history: Vec<f64> = Vec::new();
    for it in 0..options.max_iterations {
        let gy = gradient_of(data, &y).expect("finite likelihood");
        let (z, diff_norm) = loop {
            let z = project(&(&y + gy.scale(step)), constraint);
            let diff = &z - &y;
            let dn2 = diff.norm_squared();
            let rise = log_likelihood_change(data, &y, &z);
            if rise.is_finite() && rise >= linalg::inner(&gy, &diff) - dn2 / (2.0 * step) {
                break (z, dn2.sqrt());
            }
            step *= 0.5;
            if step < 1e-300 {
                break (y.clone(), 0.0);
            }
        };
        let mapping_norm = diff_norm / step;
        let rise = log_likelihood_change(data, &x, &z);
        if rise < 0.0 && theta > 1.0 {
            theta = 1.0;
            y = x.clone();
            continue;
        }
        let theta_next = (1.0 + (1.0 + 4.0 * theta * theta).sqrt()) / 2.0;
        let beta = (theta - 1.0) / theta_next;
        let x_prev = x.clone();
        if rise > 0.0 {
            x = z;
            gain += rise;
        }
        y = &x + (&x - &x_prev).scale(beta);
        if gradient_of(data, &y).is_none() {
            y = x.clone();
            theta = 1.0;
        } else {
            theta = theta_next;
        }
        step *= 1.25;
        history.push(gain);
        if mapping_norm <= options.gradient_tol {
            let fx = f(&x);
            return finish(x, fx, it + 1);
        }
        let n = history.len();
        if n > options.stall_window && gain - history[n - 1 - options.stall_window] < options.stall_tol {
            let fx = f(&x);
            return finish(x, fx, it + 1);
        }
    }
    fx = f(&x);
    Err(Error::NonConvergence {
        solver: "likelihood ascent",
        iterations: options.max_iterations,
        best_value: fx,
    })
}
