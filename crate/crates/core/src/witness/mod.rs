//! Entanglement witnesses, detected-set membership and the fidelity program
//! deciding membership in the shrunken core `Γ_W`.

mod fidelity;

pub use fidelity::{max_fidelity_to_undetected, FidelityBracket, FIDELITY_TOL};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::qstate::{self, ops, DensityMatrix};

/// Relative margin turning `α > 2‖W‖_∞δ` into a closed, testable condition.
pub const STRICT_MARGIN: f64 = 1e-9;

const K_SINGULAR_TOL: f64 = 1e-12;
const D_ZERO_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    Linear,
    AccessibleNonlinear,
}

/// Operators entering the accessible nonlinear witness, split into Hermitian
/// parts so that every functional is a real inner product.
#[derive(Clone, Debug)]
struct NonlinearOperators {
    u: CMatrix,
    reference: Vec<Complex64>,
    c_herm: CMatrix,
    c_anti: CMatrix,
    k_herm: CMatrix,
    k_anti: CMatrix,
}

/// A linear witness `W`, or the accessible nonlinear witness built from `W`,
/// a Hermitian unitary `U` and a reference pure state.
#[derive(Clone, Debug)]
pub struct WitnessSpec {
    kind: WitnessKind,
    w: CMatrix,
    w_eigenvalues: Vec<f64>,
    w_eigenvectors: CMatrix,
    nonlinear: Option<NonlinearOperators>,
}

/// The scalars `c`, `k` and `d = tr(σW) − c·k` of the nonlinear witness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonlinearTerms {
    pub nl_c: Complex64,
    pub nl_k: Complex64,
    pub nl_d: Complex64,
}

impl WitnessSpec {
    pub fn linear(w: CMatrix) -> Result<Self> {
        if w.nrows() != w.ncols() || w.nrows() < 2 {
            return Err(Error::InvalidWitness(format!(
                "W must be square with dimension >= 2, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        let dev = linalg::max_hermitian_deviation(&w);
        if dev > qstate::HERMITIAN_TOL {
            return Err(Error::InvalidWitness(format!("W is not Hermitian (deviation {dev:.3e})")));
        }
        let w = linalg::hermitian_part(&w);
        let (w_eigenvalues, w_eigenvectors) = linalg::hermitian_eigen(&w);
        if w_eigenvalues[w_eigenvalues.len() - 1] <= 0.0 {
            return Err(Error::InvalidWitness(
                "W has no positive eigenvalue, so no state is undetected".into(),
            ));
        }
        Ok(Self {
            kind: WitnessKind::Linear,
            w,
            w_eigenvalues,
            w_eigenvectors,
            nonlinear: None,
        })
    }

    /// Accessible nonlinear witness. `reference` defaults to the singlet
    /// `(|01⟩ − |10⟩)/√2` for two qubits.
    pub fn accessible_nonlinear(w: CMatrix, u: CMatrix, reference: Option<Vec<Complex64>>) -> Result<Self> {
        let mut spec = Self::linear(w)?;
        let dim = spec.dim();
        let local = linalg::exact_sqrt(dim).ok_or_else(|| {
            Error::Structure(format!("dimension {dim} is not a square d_A·d_B with d_A = d_B"))
        })?;
        if u.nrows() != dim || u.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: u.nrows(),
            });
        }
        let dev = linalg::max_hermitian_deviation(&u);
        if dev > qstate::HERMITIAN_TOL {
            return Err(Error::InvalidWitness(format!("U is not Hermitian (deviation {dev:.3e})")));
        }
        let u = linalg::hermitian_part(&u);
        let unitarity = (&u * &u - linalg::identity(dim)).camax();
        if unitarity > qstate::HERMITIAN_TOL {
            return Err(Error::InvalidWitness(format!("U² differs from 𝟙 by {unitarity:.3e}")));
        }
        let reference = match reference {
            Some(r) => r,
            None if dim == 4 => ops::psi_minus(),
            None => {
                return Err(Error::InvalidWitness(
                    "a reference state is required outside the two-qubit case".into(),
                ))
            }
        };
        if reference.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: reference.len(),
            });
        }
        let norm = linalg::vector_norm(&reference);
        if norm == 0.0 {
            return Err(Error::InvalidWitness("reference state is zero".into()));
        }
        let reference: Vec<Complex64> = reference.iter().map(|z| z / norm).collect();
        let c_op = linalg::partial_transpose(&(linalg::projector(&reference) * &u), local, local);
        let k_op = linalg::partial_transpose(&u, local, local);
        spec.kind = WitnessKind::AccessibleNonlinear;
        spec.nonlinear = Some(NonlinearOperators {
            c_herm: linalg::hermitian_part(&c_op),
            c_anti: linalg::antihermitian_part(&c_op),
            k_herm: linalg::hermitian_part(&k_op),
            k_anti: linalg::antihermitian_part(&k_op),
            u,
            reference,
        });
        Ok(spec)
    }

    /// `𝟙/2 − |Φ⁺⟩⟨Φ⁺|`, the standard two-qubit witness for `|Φ⁺⟩`.
    pub fn phi_plus_operator() -> CMatrix {
        linalg::identity(4).scale(0.5) - linalg::projector(&ops::phi_plus())
    }

    pub fn phi_plus_linear() -> Self {
        Self::linear(Self::phi_plus_operator()).expect("valid witness")
    }

    /// Nonlinear witness from `𝟙/2 − |Φ⁺⟩⟨Φ⁺|` with `U = σ_z ⊗ σ_z`.
    pub fn phi_plus_nonlinear() -> Self {
        let u = ops::pauli_string("zz").expect("valid axes");
        Self::accessible_nonlinear(Self::phi_plus_operator(), u, None).expect("valid witness")
    }

    pub fn kind(&self) -> WitnessKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn w(&self) -> &CMatrix {
        &self.w
    }

    pub fn u(&self) -> Option<&CMatrix> {
        self.nonlinear.as_ref().map(|n| &n.u)
    }

    pub fn reference_state(&self) -> Option<&[Complex64]> {
        self.nonlinear.as_ref().map(|n| n.reference.as_slice())
    }

    /// `‖W‖_∞`
    pub fn w_op_norm(&self) -> f64 {
        let n = self.w_eigenvalues.len();
        self.w_eigenvalues[0].abs().max(self.w_eigenvalues[n - 1].abs())
    }

    pub(crate) fn w_spectrum(&self) -> (&[f64], &CMatrix) {
        (&self.w_eigenvalues, &self.w_eigenvectors)
    }

    fn check_dim(&self, m: &CMatrix) -> Result<()> {
        if m.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: m.nrows(),
            });
        }
        Ok(())
    }

    pub fn linear_value(&self, sigma: &DensityMatrix) -> Result<f64> {
        self.check_dim(sigma.matrix())?;
        Ok(linalg::inner(sigma.matrix(), &self.w))
    }

    pub fn nonlinear_terms(&self, sigma: &DensityMatrix) -> Result<NonlinearTerms> {
        self.check_dim(sigma.matrix())?;
        let ops = self
            .nonlinear
            .as_ref()
            .ok_or_else(|| Error::Unsupported("linear witness has no nonlinear terms".into()))?;
        Ok(terms_of(sigma.matrix(), &self.w, ops))
    }

    /// Witness value on any Hermitian unit-trace operator of matching size.
    pub(crate) fn value_of(&self, m: &CMatrix) -> f64 {
        let w = linalg::inner(m, &self.w);
        match &self.nonlinear {
            None => w,
            Some(ops) => nonlinear_value(w, &terms_of(m, &self.w, ops)),
        }
    }

    /// Witness value along `(1 − t)·a + t·b`. Every term is a linear
    /// functional of the state, so only the endpoints are evaluated.
    pub(crate) fn along_segment(&self, a: &CMatrix, b: &CMatrix) -> impl Fn(f64) -> f64 {
        let ends = |m: &CMatrix| {
            let w = linalg::inner(m, &self.w);
            (w, self.nonlinear.as_ref().map(|ops| terms_of(m, &self.w, ops)))
        };
        let (wa, ta) = ends(a);
        let (wb, tb) = ends(b);
        move |t| {
            let w = (1.0 - t) * wa + t * wb;
            match (ta, tb) {
                (Some(ta), Some(tb)) => {
                    let nl_c = ta.nl_c * (1.0 - t) + tb.nl_c * t;
                    let nl_k = ta.nl_k * (1.0 - t) + tb.nl_k * t;
                    nonlinear_value(w, &NonlinearTerms { nl_c, nl_k, nl_d: w - nl_c * nl_k })
                }
                _ => w,
            }
        }
    }

    /// Gradient of the witness value with respect to the state, as a
    /// Hermitian matrix (real inner product `Re tr(G·δσ)`).
    pub(crate) fn gradient_of(&self, m: &CMatrix) -> CMatrix {
        let Some(ops) = &self.nonlinear else {
            return self.w.clone();
        };
        let t = terms_of(m, &self.w, ops);
        let w = t.nl_d + t.nl_c * t.nl_k;
        let (c, k, d) = (t.nl_c, t.nl_k, t.nl_d);
        let s = 1.0 - k.norm_sqr();
        let dc = d.conj();
        let i = linalg::I;
        let (gw, gcr, gci, gkr, gki) = if s < K_SINGULAR_TOL {
            (1.0, -2.0 * c.re, -2.0 * c.im, 0.0, 0.0)
        } else {
            let d2 = d.norm_sqr();
            (
                1.0 - 2.0 * d.re / s,
                -2.0 * c.re + 2.0 * (dc * k).re / s,
                -2.0 * c.im + 2.0 * (i * dc * k).re / s,
                2.0 * (dc * c).re / s - 2.0 * k.re * d2 / (s * s),
                2.0 * (i * dc * c).re / s - 2.0 * k.im * d2 / (s * s),
            )
        };
        let _ = w;
        self.w.scale(gw)
            + ops.c_herm.scale(gcr)
            + ops.c_anti.scale(gci)
            + ops.k_herm.scale(gkr)
            + ops.k_anti.scale(gki)
    }
}

fn terms_of(m: &CMatrix, w_op: &CMatrix, ops: &NonlinearOperators) -> NonlinearTerms {
    let w = linalg::inner(m, w_op);
    let nl_c = Complex64::new(linalg::inner(m, &ops.c_herm), linalg::inner(m, &ops.c_anti));
    let nl_k = Complex64::new(linalg::inner(m, &ops.k_herm), linalg::inner(m, &ops.k_anti));
    NonlinearTerms {
        nl_c,
        nl_k,
        nl_d: w - nl_c * nl_k,
    }
}

/// `w − |c|² − |d|²/(1 − |k|²)` with the limit conventions at `|k| → 1`:
/// the last term vanishes when `d → 0` too, otherwise the value is `−∞`.
fn nonlinear_value(w: f64, t: &NonlinearTerms) -> f64 {
    let s = 1.0 - t.nl_k.norm_sqr();
    let head = w - t.nl_c.norm_sqr();
    if s < K_SINGULAR_TOL {
        if t.nl_d.norm() < D_ZERO_TOL {
            head
        } else {
            f64::NEG_INFINITY
        }
    } else {
        head - t.nl_d.norm_sqr() / s
    }
}

/// `tr(σW)` for linear witnesses, `w_∞(σ)` for the nonlinear kind.
pub fn witness_value(spec: &WitnessSpec, sigma: &DensityMatrix) -> Result<f64> {
    spec.check_dim(sigma.matrix())?;
    Ok(spec.value_of(sigma.matrix()))
}

/// Membership in the detected set `{σ : w(σ) < 0}`.
pub fn detects(spec: &WitnessSpec, sigma: &DensityMatrix) -> Result<bool> {
    Ok(witness_value(spec, sigma)? < 0.0)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("δ = {delta} outside (0, 1)")));
    }
    Ok(())
}

/// Smallest admissible `α` (with a strictness margin) such that
/// `{σ : tr(σW) < −α}` lies inside `Γ_W`.
pub fn alpha_threshold(spec: &WitnessSpec, delta: f64) -> Result<f64> {
    if spec.kind != WitnessKind::Linear {
        return Err(Error::Unsupported(
            "the Γ_α construction is only available for linear witnesses".into(),
        ));
    }
    check_delta(delta)?;
    Ok(2.0 * spec.w_op_norm() * delta * (1.0 + STRICT_MARGIN))
}

/// Fidelity threshold `√(1 − δ²)` separating `Γ_W` from its complement.
pub fn fidelity_threshold(delta: f64) -> f64 {
    (1.0 - delta * delta).max(0.0).sqrt()
}

/// Membership in `Γ_W`: every undetected state has fidelity with `σ` below
/// `√(1 − δ²)` by more than the solver tolerance.
pub fn in_gamma_w(sigma: &DensityMatrix, spec: &WitnessSpec, delta: f64) -> Result<bool> {
    check_delta(delta)?;
    let threshold = fidelity_threshold(delta);
    let bracket = max_fidelity_to_undetected(sigma, spec, Some(threshold - FIDELITY_TOL))?;
    Ok(bracket.upper < threshold - FIDELITY_TOL)
}

/// Membership in the complement `Γ̄_W`.
pub fn in_gamma_w_complement(sigma: &DensityMatrix, spec: &WitnessSpec, delta: f64) -> Result<bool> {
    in_gamma_w(sigma, spec, delta).map(|inside| !inside)
}
