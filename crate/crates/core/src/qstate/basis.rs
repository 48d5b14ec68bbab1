use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};

use super::DensityMatrix;

/// One generalized Gell-Mann generator, normalized to `tr λ² = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    /// `(|j⟩⟨k| + |k⟩⟨j|)/√2`, `j < k`
    Symmetric(usize, usize),
    /// `(−i|j⟩⟨k| + i|k⟩⟨j|)/√2`, `j < k`
    Antisymmetric(usize, usize),
    /// `(Σ_{m<l} |m⟩⟨m| − l|l⟩⟨l|)/√(l(l+1))`, `1 ≤ l < d`
    Diagonal(usize),
}

impl Generator {
    fn matrix(self, d: usize) -> CMatrix {
        let mut m = CMatrix::zeros(d, d);
        match self {
            Generator::Symmetric(j, k) => {
                m[(j, k)] = c(FRAC_1_SQRT_2, 0.0);
                m[(k, j)] = c(FRAC_1_SQRT_2, 0.0);
            }
            Generator::Antisymmetric(j, k) => {
                m[(j, k)] = c(0.0, -FRAC_1_SQRT_2);
                m[(k, j)] = c(0.0, FRAC_1_SQRT_2);
            }
            Generator::Diagonal(l) => {
                let norm = ((l * (l + 1)) as f64).sqrt();
                for i in 0..l {
                    m[(i, i)] = c(1.0 / norm, 0.0);
                }
                m[(l, l)] = c(-(l as f64) / norm, 0.0);
            }
        }
        m
    }

    /// Smallest and largest eigenvalue; bounds `tr(σλ)` over all states.
    fn spectral_range(self) -> (f64, f64) {
        match self {
            Generator::Symmetric(..) | Generator::Antisymmetric(..) => (-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
            Generator::Diagonal(l) => {
                let norm = ((l * (l + 1)) as f64).sqrt();
                (-(l as f64) / norm, 1.0 / norm)
            }
        }
    }
}

/// The `d²−1` traceless Hermitian generators of SU(d), orthonormal under the
/// Hilbert-Schmidt inner product. Ordering: symmetric pairs, antisymmetric
/// pairs, then diagonal, pairs in lexicographic `(j, k)` order.
#[derive(Clone, Debug)]
pub struct GeneratorBasis {
    dim: usize,
    generators: Vec<Generator>,
    ops: Vec<CMatrix>,
}

/// Generalized Bloch vector `τ` with `σ(τ) = 𝟙/d + Σ τ_j λ_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlochVector {
    pub tau: Vec<f64>,
    pub dim: usize,
}

impl BlochVector {
    pub fn new(tau: Vec<f64>, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if tau.len() != dim * dim - 1 {
            return Err(Error::DimensionMismatch {
                expected: dim * dim - 1,
                found: tau.len(),
            });
        }
        Ok(Self { tau, dim })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            tau: vec![0.0; dim * dim - 1],
            dim,
        }
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.tau
            .iter()
            .zip(&other.tau)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

impl GeneratorBasis {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        let mut generators = Vec::with_capacity(d * d - 1);
        for j in 0..d {
            for k in j + 1..d {
                generators.push(Generator::Symmetric(j, k));
            }
        }
        for j in 0..d {
            for k in j + 1..d {
                generators.push(Generator::Antisymmetric(j, k));
            }
        }
        for l in 1..d {
            generators.push(Generator::Diagonal(l));
        }
        let ops = generators.iter().map(|g| g.matrix(d)).collect();
        Ok(Self {
            dim: d,
            generators,
            ops,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    /// Range of coordinate `j` over the whole state space.
    pub fn coordinate_range(&self, j: usize) -> (f64, f64) {
        self.generators[j].spectral_range()
    }

    /// Hermitian unit-trace operator `𝟙/d + Σ τ_j λ_j`; not necessarily positive.
    pub fn operator(&self, tau: &[f64]) -> Result<CMatrix> {
        if tau.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: tau.len(),
            });
        }
        let d = self.dim;
        let mut m = linalg::identity(d).unscale(d as f64);
        self.accumulate(&mut m, tau);
        Ok(m)
    }

    fn accumulate(&self, m: &mut CMatrix, tau: &[f64]) {
        for (g, &t) in self.generators.iter().zip(tau) {
            if t == 0.0 {
                continue;
            }
            match *g {
                Generator::Symmetric(j, k) => {
                    let v = t * FRAC_1_SQRT_2;
                    m[(j, k)].re += v;
                    m[(k, j)].re += v;
                }
                Generator::Antisymmetric(j, k) => {
                    let v = t * FRAC_1_SQRT_2;
                    m[(j, k)].im -= v;
                    m[(k, j)].im += v;
                }
                Generator::Diagonal(l) => {
                    let norm = ((l * (l + 1)) as f64).sqrt();
                    for i in 0..l {
                        m[(i, i)].re += t / norm;
                    }
                    m[(l, l)].re -= t * l as f64 / norm;
                }
            }
        }
    }

    /// `τ_j = tr(σ λ_j)` for any Hermitian operator.
    pub fn coordinates(&self, m: &CMatrix) -> Vec<f64> {
        self.generators
            .iter()
            .map(|g| match *g {
                Generator::Symmetric(j, k) => std::f64::consts::SQRT_2 * m[(j, k)].re,
                Generator::Antisymmetric(j, k) => -std::f64::consts::SQRT_2 * m[(j, k)].im,
                Generator::Diagonal(l) => {
                    let norm = ((l * (l + 1)) as f64).sqrt();
                    let head: f64 = (0..l).map(|i| m[(i, i)].re).sum();
                    (head - l as f64 * m[(l, l)].re) / norm
                }
            })
            .collect()
    }

    pub fn from_bloch(&self, tau: &BlochVector) -> Result<CMatrix> {
        if tau.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: tau.dim,
            });
        }
        self.operator(&tau.tau)
    }

    pub fn to_bloch(&self, sigma: &DensityMatrix) -> BlochVector {
        BlochVector {
            tau: self.coordinates(sigma.matrix()),
            dim: self.dim,
        }
    }
}

pub fn generator_basis(d: usize) -> Result<GeneratorBasis> {
    GeneratorBasis::new(d)
}

/// `σ(τ) = 𝟙/d + Σ τ_j λ_j`; Hermitian with unit trace, possibly non-positive.
pub fn from_bloch(tau: &BlochVector) -> Result<CMatrix> {
    BlochVector::new(tau.tau.clone(), tau.dim)?;
    GeneratorBasis::new(tau.dim)?.from_bloch(tau)
}

pub fn to_bloch(sigma: &DensityMatrix) -> BlochVector {
    // A valid state always has dimension >= 1; dimension 1 has no generators.
    match GeneratorBasis::new(sigma.dim()) {
        Ok(basis) => basis.to_bloch(sigma),
        Err(_) => BlochVector {
            tau: Vec::new(),
            dim: sigma.dim(),
        },
    }
}
