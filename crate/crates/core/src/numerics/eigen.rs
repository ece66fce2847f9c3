//! Eigen-decomposition of small dense complex (non-Hermitian) matrices.
//!
//! The complex Schur form `A = Q T Q^H` is computed with nalgebra; the
//! eigenvectors of the triangular factor follow by back-substitution, with
//! near-zero pivots replaced by a small floor in the manner of LAPACK's
//! `ztrevc`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EigenError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("Schur iteration did not converge")]
    NoConvergence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: Complex64,
    /// Right eigenvector with unit Euclidean norm.
    pub vector: DVector<Complex64>,
}

pub fn eig(matrix: &DMatrix<Complex64>) -> Result<Vec<EigenPair>, EigenError> {
    let (rows, cols) = matrix.shape();
    if rows != cols {
        return Err(EigenError::NotSquare { rows, cols });
    }
    if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    let n = rows;
    if n == 0 {
        return Ok(Vec::new());
    }

    let schur =
        nalgebra::linalg::Schur::try_new(matrix.clone(), f64::EPSILON, 10_000).ok_or(EigenError::NoConvergence)?;
    let (q, t) = schur.unpack();

    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let smin = (f64::EPSILON * scale).max(f64::MIN_POSITIVE);

    let mut pairs = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut y = DVector::<Complex64>::zeros(n);
        y[k] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in j + 1..=k {
                acc += t[(j, l)] * y[l];
            }
            let mut pivot = t[(j, j)] - lambda;
            if pivot.norm() < smin {
                pivot = Complex64::new(smin, 0.0);
            }
            y[j] = -acc / pivot;
        }
        let mut v = &q * y;
        let norm = v.norm();
        v /= Complex64::new(norm, 0.0);
        pairs.push(EigenPair { value: lambda, vector: v });
    }
    Ok(pairs)
}
