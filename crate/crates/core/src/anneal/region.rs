use crate::error::Result;
use crate::linalg::{self, CMatrix};
use crate::qstate::DensityMatrix;
use crate::witness::{self, WitnessSpec};

/// Black-box membership predicate for the annealing walk.
pub trait Region: Sync {
    fn contains(&self, sigma: &DensityMatrix) -> Result<bool>;
}

/// The whole state space.
#[derive(Clone, Copy, Debug, Default)]
pub struct Unconstrained;

impl Region for Unconstrained {
    fn contains(&self, _sigma: &DensityMatrix) -> Result<bool> {
        Ok(true)
    }
}

/// `Γ̄_α = {σ : tr(σW) ≥ −α}`
#[derive(Clone, Debug)]
pub struct GammaAlphaComplement {
    w: CMatrix,
    alpha: f64,
}

impl GammaAlphaComplement {
    pub fn new(w: CMatrix, alpha: f64) -> Self {
        Self { w, alpha }
    }
}

impl Region for GammaAlphaComplement {
    fn contains(&self, sigma: &DensityMatrix) -> Result<bool> {
        Ok(linalg::inner(sigma.matrix(), &self.w) >= -self.alpha)
    }
}

/// `Γ̄_W`: states within fidelity `√(1 − δ²)` of some undetected state.
#[derive(Clone, Debug)]
pub struct GammaWComplement<'a> {
    spec: &'a WitnessSpec,
    delta: f64,
}

impl<'a> GammaWComplement<'a> {
    pub fn new(spec: &'a WitnessSpec, delta: f64) -> Self {
        Self { spec, delta }
    }
}

impl Region for GammaWComplement<'_> {
    fn contains(&self, sigma: &DensityMatrix) -> Result<bool> {
        witness::in_gamma_w_complement(sigma, self.spec, self.delta)
    }
}
