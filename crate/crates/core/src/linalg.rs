//! Small dense complex linear-algebra helpers shared by every module.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

/// `(m + m†) / 2`
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// `(m − m†) / 2i`, so that `m = hermitian_part(m) + i·antihermitian_part(m)`.
pub fn antihermitian_part(m: &CMatrix) -> CMatrix {
    (m - m.adjoint()) * c(0.0, -0.5)
}

pub fn max_hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `Re tr(a b)`; the real inner product for Hermitian matrices.
pub fn inner(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (a[(i, j)], b[(j, i)]);
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

pub fn eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigenvalues(m)[0]
}

/// `V diag(values) V†`
pub fn from_spectrum(values: &[f64], vectors: &CMatrix) -> CMatrix {
    let n = vectors.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in values.iter().enumerate() {
        if lam == 0.0 {
            continue;
        }
        let v = vectors.column(k);
        for i in 0..n {
            let vi = v[i] * lam;
            for j in 0..n {
                out[(i, j)] += vi * v[j].conj();
            }
        }
    }
    out
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn spectral_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let mapped: Vec<f64> = values.into_iter().map(f).collect();
    from_spectrum(&mapped, &vectors)
}

pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    spectral_map(m, |x| x.max(0.0).sqrt())
}

/// Strict positive definiteness via a Cholesky attempt; cheap validity test
/// for sampled states (the semidefinite boundary has measure zero).
pub fn is_positive_definite(m: &CMatrix) -> bool {
    let n = m.nrows();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = m[(j, j)].re;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if !(diag > 0.0) {
            return false;
        }
        let ljj = diag.sqrt();
        l[(j, j)] = c(ljj, 0.0);
        for i in j + 1..n {
            let mut acc = m[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = acc / ljj;
        }
    }
    true
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        cumulative += x;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Frobenius projection of a Hermitian matrix onto the density matrices.
pub fn project_density(m: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    from_spectrum(&project_simplex(&values), &vectors)
}

/// Transposes the second factor of a `da·db` dimensional bipartite operator.
pub fn partial_transpose(m: &CMatrix, da: usize, db: usize) -> CMatrix {
    let n = da * db;
    let mut out = CMatrix::zeros(n, n);
    for a1 in 0..da {
        for b1 in 0..db {
            for a2 in 0..da {
                for b2 in 0..db {
                    out[(a1 * db + b2, a2 * db + b1)] = m[(a1 * db + b1, a2 * db + b2)];
                }
            }
        }
    }
    out
}

/// `|ψ⟩⟨ψ|`
pub fn projector(psi: &[Complex64]) -> CMatrix {
    let n = psi.len();
    CMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj())
}

pub fn vector_norm(psi: &[Complex64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Perfect integer square root, if any.
pub fn exact_sqrt(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn simplex_projection_is_idempotent_on_simplex() {
        let p = [0.2, 0.3, 0.5];
        let q = project_simplex(&p);
        for (a, b) in p.iter().zip(&q) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let q = project_simplex(&[2.0, -1.0, 0.0]);
        assert_eq!(q, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn partial_transpose_of_product_transposes_second_factor() {
        let a = CMatrix::from_row_slice(2, 2, &[ONE, c(0.0, 2.0), c(3.0, 0.0), c(4.0, 0.0)]);
        let b = CMatrix::from_row_slice(2, 2, &[c(5.0, 0.0), c(0.0, 1.0), c(0.0, -7.0), ONE]);
        let pt = partial_transpose(&kron(&a, &b), 2, 2);
        let expected = kron(&a, &b.transpose());
        assert_abs_diff_eq!((pt - expected).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn positive_definiteness() {
        let m = CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        assert!(is_positive_definite(&m));
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 2.0), c(0.0, -2.0), c(1.0, 0.0)]);
        assert!(!is_positive_definite(&m));
        assert!(!is_positive_definite(&projector(&[ONE, ZERO])));
    }

    #[test]
    fn eigenvalues_sorted_and_reconstruct() {
        let m = CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let (vals, vecs) = hermitian_eigen(&m);
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!((from_spectrum(&vals, &vecs) - m).norm(), 0.0, epsilon = 1e-12);
    }
}
