//! Dense complex helpers on top of `ndarray` and LAPACK.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::lapack::{self, Trans};
use crate::error::Result;

/// Column-major copy of a row-major array.
pub fn colmajor(a: &Array2<C64>) -> Vec<C64> {
    let (m, n) = a.dim();
    let mut out = Vec::with_capacity(m * n);
    for j in 0..n {
        for i in 0..m {
            out.push(a[[i, j]]);
        }
    }
    out
}

/// Row-major array from a column-major buffer.
pub fn from_colmajor(m: usize, n: usize, buf: &[C64]) -> Array2<C64> {
    Array2::from_shape_fn((m, n), |(i, j)| buf[i + j * m])
}

/// Eigenvalues (ascending) of a Hermitian matrix.
pub fn herm_eigvals(a: &Array2<C64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    let mut buf = colmajor(a);
    lapack::heevd(n, &mut buf, false)
}

/// Eigenvalues (ascending) and eigenvectors (as columns).
pub fn herm_eig(a: &Array2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    let n = a.nrows();
    let mut buf = colmajor(a);
    let w = lapack::heevd(n, &mut buf, true)?;
    Ok((w, from_colmajor(n, n, &buf)))
}

/// `A B` through BLAS.
pub fn matmul(a: &Array2<C64>, b: &Array2<C64>) -> Result<Array2<C64>> {
    let (m, k) = a.dim();
    let (k2, n) = b.dim();
    assert_eq!(k, k2, "matmul inner dimension");
    let ca = colmajor(a);
    let cb = colmajor(b);
    let mut cc = vec![C64::new(0.0, 0.0); m * n];
    lapack::zgemm(Trans::No, Trans::No, m, n, k, C64::new(1.0, 0.0), &ca, m, &cb, k, C64::new(0.0, 0.0), &mut cc, m)?;
    Ok(from_colmajor(m, n, &cc))
}

/// Gram matrix of the shorter side: `A A*` when `rows <= cols`, else `A* A`.
/// Takes a column-major buffer.
pub fn gram_colmajor(m: usize, n: usize, a: &[C64]) -> Result<(usize, Vec<C64>)> {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    if m <= n {
        let mut g = vec![zero; m * m];
        lapack::zgemm(Trans::No, Trans::H, m, m, n, one, a, m, a, m, zero, &mut g, m)?;
        Ok((m, g))
    } else {
        let mut g = vec![zero; n * n];
        lapack::zgemm(Trans::H, Trans::No, n, n, m, one, a, m, a, m, zero, &mut g, n)?;
        Ok((n, g))
    }
}

/// Singular values in descending order, through the Gram matrix of the
/// shorter side. Relative accuracy is about `ε σ₁² / σ`, ample for decay
/// profiles down to `1e-6 σ₁`.
pub fn singular_values_colmajor(m: usize, n: usize, a: &[C64]) -> Result<Vec<f64>> {
    if m == 0 || n == 0 {
        return Ok(Vec::new());
    }
    let (k, mut g) = gram_colmajor(m, n, a)?;
    let w = lapack::heevd(k, &mut g, false)?;
    Ok(w.iter().rev().map(|&v| v.max(0.0).sqrt()).collect())
}

pub fn singular_values(a: &Array2<C64>) -> Result<Vec<f64>> {
    let (m, n) = a.dim();
    singular_values_colmajor(m, n, &colmajor(a))
}

/// Largest |A_ij − B_ij|.
pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Conjugate transpose.
pub fn adjoint(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|v| v.conj())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigvecs_diagonalize() {
        let a = Array2::from_shape_vec(
            (2, 2),
            vec![C64::new(2.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0), C64::new(2.0, 0.0)],
        )
        .unwrap();
        let (w, v) = herm_eig(&a).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] - 3.0).abs() < 1e-14);
        let d = matmul(&adjoint(&v), &matmul(&a, &v).unwrap()).unwrap();
        assert!((d[[0, 0]].re - 1.0).abs() < 1e-13 && d[[0, 1]].norm() < 1e-13);
    }

    #[test]
    fn singular_values_of_nilpotent() {
        let a = Array2::from_shape_vec(
            (2, 3),
            vec![
                C64::new(0.0, 0.0),
                C64::new(3.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, -2.0),
            ],
        )
        .unwrap();
        let s = singular_values(&a).unwrap();
        assert!((s[0] - 3.0).abs() < 1e-14 && (s[1] - 2.0).abs() < 1e-14);
    }
}
