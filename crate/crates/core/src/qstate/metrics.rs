use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

use super::DensityMatrix;

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Uhlmann root fidelity `tr √(√a b √a)`, clamped to `[0, 1]`.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    let root = linalg::psd_sqrt(a.matrix());
    let inner = &root * b.matrix() * &root;
    let f: f64 = linalg::eigenvalues(&inner).iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok(f.clamp(0.0, 1.0))
}

/// `‖a − b‖₂ = √tr (a−b)²`
pub fn hs_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    Ok(linalg::frobenius_norm(&(a.matrix() - b.matrix())))
}

/// Unnormalized trace norm `‖a − b‖_tr` (orthogonal pure states give 2).
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    Ok(linalg::eigenvalues(&(a.matrix() - b.matrix())).iter().map(|v| v.abs()).sum())
}

/// Operator norm of a Hermitian matrix: the largest absolute eigenvalue.
pub fn op_norm(m: &CMatrix) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let eig = linalg::eigenvalues(m);
    Ok(eig[0].abs().max(eig[eig.len() - 1].abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::ops;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fidelity_examples() {
        let zero = DensityMatrix::pure(&ops::ket0()).unwrap();
        let one = DensityMatrix::pure(&ops::ket1()).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2);
        assert_abs_diff_eq!(fidelity(&zero, &zero).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(&zero, &one).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(&zero, &mixed).unwrap(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(&mixed, &zero).unwrap(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert!(matches!(
            fidelity(&zero, &DensityMatrix::maximally_mixed(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn distance_examples() {
        let zero = DensityMatrix::pure(&ops::ket0()).unwrap();
        let one = DensityMatrix::pure(&ops::ket1()).unwrap();
        assert_eq!(hs_distance(&zero, &zero).unwrap(), 0.0);
        assert_abs_diff_eq!(trace_distance(&zero, &one).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hs_distance(&zero, &one).unwrap(), std::f64::consts::SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(op_norm(&ops::sigma_z()).unwrap(), 1.0, epsilon = 1e-12);
    }
}
