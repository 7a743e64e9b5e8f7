//! Thin wrappers over faer for the dense kernels.

use alloc::vec::Vec;

use faer::linalg::solvers::Solve;
use faer::{Accum, Mat, MatRef, Par, Side};

use crate::error::{Error, Result};

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending, eigenvectors
/// as the columns of `vectors`.
pub(crate) struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

pub(crate) fn sym_eigen(matrix: &Mat<f64>) -> Result<SymEigen> {
    let evd = matrix
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::Convergence { what: "symmetric eigensolver", residual: f64::NAN })?;
    let s = evd.S().column_vector();
    let values = (0..s.nrows()).map(|i| s[i]).collect();
    Ok(SymEigen { values, vectors: evd.U().to_owned() })
}

pub(crate) fn sym_eigen_row_major(n: usize, a: &[f64]) -> Result<SymEigen> {
    sym_eigen(&Mat::from_fn(n, n, |i, j| a[i * n + j]))
}

/// Solves `A x = b` with partial-pivoting LU.
pub(crate) fn solve(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let m = Mat::from_fn(n, n, |i, j| a[i * n + j]);
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let x = m.partial_piv_lu().solve(&rhs);
    (0..n).map(|i| x[(i, 0)]).collect()
}

/// `dst = lhs * rhs`.
pub(crate) fn matmul_into(dst: &mut Mat<f64>, lhs: MatRef<'_, f64>, rhs: MatRef<'_, f64>) {
    faer::linalg::matmul::matmul(dst.as_mut(), Accum::Replace, lhs, rhs, 1.0, Par::Seq);
}
