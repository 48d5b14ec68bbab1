//! Density matrices, the generalized Bloch parametrization, state metrics,
//! Hilbert-Schmidt sampling and state-space volumes.

mod basis;
mod metrics;
pub mod ops;
mod sampling;
mod volume;

pub use basis::{from_bloch, generator_basis, to_bloch, BlochVector, GeneratorBasis};
pub use metrics::{fidelity, hs_distance, op_norm, trace_distance};
pub use sampling::{reduce_purification, sample_hs_state, sample_purification};
pub use volume::{hs_volume, ln_hs_volume, mc_hs_volume, VolumeEstimate};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-9;

/// A validated density matrix: Hermitian, unit trace and positive
/// semidefinite within [`PSD_TOL`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let m = Self::check_hermitian_unit_trace(m)?;
        let min = linalg::min_eigenvalue(&m);
        if min < -PSD_TOL {
            return Err(Error::NotPositive(min));
        }
        Ok(Self { m })
    }

    /// Like [`DensityMatrix::new`], but clips eigenvalues in `[-PSD_TOL, 0)`
    /// to zero and renormalizes, producing a strictly valid state.
    pub fn new_clipped(m: CMatrix) -> Result<Self> {
        let m = Self::check_hermitian_unit_trace(m)?;
        let (values, vectors) = linalg::hermitian_eigen(&m);
        if values[0] < -PSD_TOL {
            return Err(Error::NotPositive(values[0]));
        }
        if values[0] >= 0.0 {
            return Ok(Self { m });
        }
        let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let normalized: Vec<f64> = clipped.iter().map(|v| v / total).collect();
        Ok(Self {
            m: linalg::hermitian_part(&linalg::from_spectrum(&normalized, &vectors)),
        })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self { m }
    }

    fn check_hermitian_unit_trace(m: CMatrix) -> Result<CMatrix> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() < 1 {
            return Err(Error::InvalidDimension(m.nrows()));
        }
        let dev = linalg::max_hermitian_deviation(&m);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = linalg::trace(&m).re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::NotUnitTrace(tr));
        }
        Ok(linalg::hermitian_part(&m))
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) nonzero vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm = linalg::vector_norm(psi);
        if psi.is_empty() || norm == 0.0 {
            return Err(Error::InvalidParameter("zero state vector".into()));
        }
        let normalized: Vec<Complex64> = psi.iter().map(|z| z / norm).collect();
        Ok(Self {
            m: linalg::projector(&normalized),
        })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            m: linalg::identity(d).unscale(d as f64),
        }
    }

    /// Convex combination `t·a + (1−t)·b`.
    pub fn mix(a: &Self, b: &Self, t: f64) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: b.dim(),
            });
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!("mixing weight {t} outside [0,1]")));
        }
        Ok(Self {
            m: a.m.scale(t) + b.m.scale(1.0 - t),
        })
    }

    pub fn tensor(&self, other: &Self) -> Self {
        Self {
            m: linalg::kron(&self.m, &other.m),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn purity(&self) -> f64 {
        linalg::inner(&self.m, &self.m)
    }

    /// `tr(σ A)` for an arbitrary operator.
    pub fn expectation(&self, a: &CMatrix) -> Complex64 {
        linalg::trace_product(&self.m, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn rejects_invalid_matrices() {
        let not_herm = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.0), c(0.2, 0.0), c(0.5, 0.0)]);
        assert!(matches!(DensityMatrix::new(not_herm), Err(Error::NotHermitian(_))));
        let bad_trace = linalg::identity(2);
        assert!(matches!(DensityMatrix::new(bad_trace), Err(Error::NotUnitTrace(_))));
        let negative = CMatrix::from_row_slice(2, 2, &[c(1.2, 0.0), ZERO, ZERO, c(-0.2, 0.0)]);
        assert!(matches!(DensityMatrix::new(negative), Err(Error::NotPositive(_))));
    }

    #[test]
    fn clipping_removes_tiny_negative_eigenvalues() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0 + 1e-10, 0.0), ZERO, ZERO, c(-1e-10, 0.0)]);
        let rho = DensityMatrix::new_clipped(m).unwrap();
        assert!(linalg::min_eigenvalue(rho.matrix()) >= 0.0);
        assert!((linalg::trace(rho.matrix()).re - 1.0).abs() < 1e-15);
    }

    use crate::linalg::ZERO;
}
