use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

use super::DensityMatrix;

/// Haar-random unit vector on `ℂ^d ⊗ ℂ^d` (a purification of a
/// Hilbert-Schmidt distributed mixed state).
pub fn sample_purification<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<Complex64> {
    let mut psi: Vec<Complex64> = (0..d * d)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = linalg::vector_norm(&psi);
    for z in &mut psi {
        *z /= norm;
    }
    psi
}

/// Traces out the second factor of `|ψ⟩ ∈ ℂ^d ⊗ ℂ^d`: `σ = X X†` with
/// `X_{ib} = ψ_{i·d + b}`.
pub fn reduce_purification(psi: &[Complex64], d: usize) -> Result<DensityMatrix> {
    if psi.len() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            found: psi.len(),
        });
    }
    Ok(DensityMatrix::from_matrix_unchecked(reduce_unchecked(psi, d)))
}

pub(crate) fn reduce_unchecked(psi: &[Complex64], d: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        let row_i = &psi[i * d..(i + 1) * d];
        for j in i..d {
            let row_j = &psi[j * d..(j + 1) * d];
            let v: Complex64 = row_i.iter().zip(row_j).map(|(a, b)| a * b.conj()).sum();
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
        m[(i, i)].im = 0.0;
    }
    m
}

/// Draws a state from the Hilbert-Schmidt measure.
pub fn sample_hs_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<DensityMatrix> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    reduce_purification(&sample_purification(d, rng), d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{to_bloch, PSD_TOL};
    use crate::rng;

    #[test]
    fn samples_are_valid_states() {
        let mut r = rng::stream(1);
        for d in [2usize, 3, 4] {
            for _ in 0..50 {
                let s = sample_hs_state(d, &mut r).unwrap();
                assert!(DensityMatrix::new(s.matrix().clone()).is_ok());
                assert!(linalg::min_eigenvalue(s.matrix()) > -PSD_TOL);
            }
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let a: Vec<_> = (0..5).map(|_| ()).scan(rng::stream(9), |r, _| Some(sample_hs_state(3, r).unwrap())).collect();
        let b: Vec<_> = (0..5).map(|_| ()).scan(rng::stream(9), |r, _| Some(sample_hs_state(3, r).unwrap())).collect();
        assert_eq!(a, b);
    }

    /// Uniform Bloch-ball statistics: mean is the origin and the mean purity
    /// is `(1 + E|r|²)/2 = (1 + 3/5)/2 = 0.8` for the unit ball. The oracle
    /// value is recomputed below by radial quadrature.
    #[test]
    fn qubit_moments_match_uniform_ball() {
        // Oracle: E|r|² for the uniform unit ball, midpoint rule on ∫ 3 r⁴ dr.
        let m = 100_000;
        let e_r2: f64 = (0..m)
            .map(|i| {
                let r = (i as f64 + 0.5) / m as f64;
                3.0 * r.powi(4) / m as f64
            })
            .sum();
        let oracle_purity = 0.5 * (1.0 + e_r2);
        assert!((oracle_purity - 0.8).abs() < 1e-8);

        let n = 100_000;
        let mut r = rng::stream(2024);
        let mut sums = [0.0f64; 3];
        let mut sq = [0.0f64; 3];
        let mut purity = 0.0;
        let mut purity_sq = 0.0;
        for _ in 0..n {
            let s = sample_hs_state(2, &mut r).unwrap();
            let tau = to_bloch(&s).tau;
            for k in 0..3 {
                sums[k] += tau[k];
                sq[k] += tau[k] * tau[k];
            }
            let p = s.purity();
            purity += p;
            purity_sq += p * p;
        }
        let nf = n as f64;
        for k in 0..3 {
            let mean = sums[k] / nf;
            let se = ((sq[k] / nf - mean * mean) / nf).sqrt();
            assert!(mean.abs() < 3.0 * se, "coordinate {k}: mean {mean} se {se}");
        }
        let mean = purity / nf;
        let se = ((purity_sq / nf - mean * mean) / nf).sqrt();
        assert!((mean - oracle_purity).abs() < 3.0 * se, "purity {mean} vs {oracle_purity} (se {se})");
    }
}
