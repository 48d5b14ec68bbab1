//! Standard qubit operators, Bell states and product measurement bases.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, kron, CMatrix, ONE, ZERO};

pub fn sigma_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn sigma_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO])
}

pub fn sigma_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c(-1.0, 0.0)])
}

pub fn ket0() -> Vec<Complex64> {
    vec![ONE, ZERO]
}

pub fn ket1() -> Vec<Complex64> {
    vec![ZERO, ONE]
}

pub fn tensor_vec(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// `(|00⟩ + e^{iφ}|11⟩)/√2`
pub fn phi_state(phase: f64) -> Vec<Complex64> {
    vec![
        c(FRAC_1_SQRT_2, 0.0),
        ZERO,
        ZERO,
        Complex64::from_polar(FRAC_1_SQRT_2, phase),
    ]
}

pub fn phi_plus() -> Vec<Complex64> {
    phi_state(0.0)
}

/// Singlet `(|01⟩ − |10⟩)/√2`.
pub fn psi_minus() -> Vec<Complex64> {
    vec![ZERO, c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0), ZERO]
}

/// The two eigenvectors of a Pauli operator, `+1` first.
pub fn pauli_eigenbasis(axis: char) -> Result<[Vec<Complex64>; 2]> {
    let h = FRAC_1_SQRT_2;
    match axis.to_ascii_lowercase() {
        'z' => Ok([ket0(), ket1()]),
        'x' => Ok([vec![c(h, 0.0), c(h, 0.0)], vec![c(h, 0.0), c(-h, 0.0)]]),
        'y' => Ok([vec![c(h, 0.0), c(0.0, h)], vec![c(h, 0.0), c(0.0, -h)]]),
        other => Err(Error::InvalidParameter(format!("unknown Pauli axis '{other}'"))),
    }
}

pub fn pauli(axis: char) -> Result<CMatrix> {
    match axis.to_ascii_lowercase() {
        'x' => Ok(sigma_x()),
        'y' => Ok(sigma_y()),
        'z' => Ok(sigma_z()),
        'i' => Ok(CMatrix::identity(2, 2)),
        other => Err(Error::InvalidParameter(format!("unknown Pauli axis '{other}'"))),
    }
}

/// Product eigenbasis for a string of Pauli axes, e.g. `"zz"` gives
/// `|00⟩, |01⟩, |10⟩, |11⟩` in that order.
pub fn product_basis(axes: &str) -> Result<Vec<Vec<Complex64>>> {
    if axes.is_empty() {
        return Err(Error::InvalidParameter("empty measurement setting".into()));
    }
    let mut basis: Vec<Vec<Complex64>> = vec![vec![ONE]];
    for axis in axes.chars() {
        let local = pauli_eigenbasis(axis)?;
        basis = basis
            .iter()
            .flat_map(|v| local.iter().map(move |w| tensor_vec(v, w)))
            .collect();
    }
    Ok(basis)
}

/// Tensor product of Pauli operators, e.g. `"zz"` gives `σ_z ⊗ σ_z`.
pub fn pauli_string(axes: &str) -> Result<CMatrix> {
    let mut out = CMatrix::identity(1, 1);
    for axis in axes.chars() {
        out = kron(&out, &pauli(axis)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    #[test]
    fn product_bases_are_orthonormal_eigenbases() {
        for axes in ["zz", "xx", "yy", "xyz"] {
            let basis = product_basis(axes).unwrap();
            let op = pauli_string(axes).unwrap();
            for (i, v) in basis.iter().enumerate() {
                for (j, w) in basis.iter().enumerate() {
                    let ip: Complex64 = v.iter().zip(w).map(|(a, b)| a.conj() * b).sum();
                    assert!((ip.norm() - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
                }
                let proj = linalg::projector(v);
                assert!((&op * &proj - &proj * &op).norm() < 1e-14);
            }
        }
    }
}
