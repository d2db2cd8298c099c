//! Small dense linear-algebra kernels.
//!
//! Everything here works on plain `f64` slices and a row-major [`DenseMatrix`].
//! The matrices that show up in the solvers are either tiny (the `k x k` cores
//! of low-rank Hessian models, `k <= 2m`) or desk-scale Hessians used by the
//! exact baselines, so the decompositions favour robustness over blocking.

mod decomp;

pub use decomp::{cholesky_solve, sym_eig, thin_qr, SymEigen};

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Relative asymmetry tolerated by routines that require a symmetric input.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("non-finite entry encountered")]
    NonFinite,
    #[error("eigenvalue iteration failed to converge")]
    NoConvergence,
}

/// Unchecked vector kernels used on hot paths where lengths are already known
/// to agree.
pub mod kernels {
    #[inline]
    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[inline]
    pub fn norm(a: &[f64]) -> f64 {
        dot(a, a).sqrt()
    }

    /// `y += alpha * x`
    #[inline]
    pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), y.len());
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += alpha * xi;
        }
    }

    #[inline]
    pub fn scale(alpha: f64, x: &mut [f64]) {
        for xi in x.iter_mut() {
            *xi *= alpha;
        }
    }

    /// `a - b` as a new vector.
    #[inline]
    pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    /// `a + alpha * b` as a new vector.
    #[inline]
    pub fn add_scaled(a: &[f64], alpha: f64, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| x + alpha * y).collect()
    }

    #[inline]
    pub fn dist(a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    pub fn all_finite(a: &[f64]) -> bool {
        a.iter().all(|v| v.is_finite())
    }
}

fn check_len(expected: usize, found: usize) -> Result<(), LinalgError> {
    if expected == found {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { expected, found })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> Result<f64, LinalgError> {
    check_len(a.len(), b.len())?;
    Ok(kernels::dot(a, b))
}

/// Euclidean norm.
pub fn norm(a: &[f64]) -> f64 {
    kernels::norm(a)
}

/// Returns `alpha * x + y`.
pub fn axpy(alpha: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>, LinalgError> {
    check_len(x.len(), y.len())?;
    let mut out = y.to_vec();
    kernels::axpy(alpha, x, &mut out);
    Ok(out)
}

pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        check_len(rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_len(cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let rows = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            check_len(rows, c.len())?;
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `A v`
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        check_len(self.cols, v.len())?;
        Ok((0..self.rows).map(|i| kernels::dot(self.row(i), v)).collect())
    }

    /// `A^T v`
    pub fn tr_matvec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        check_len(self.rows, v.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                kernels::axpy(vi, self.row(i), &mut out);
            }
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        check_len(self.cols, other.rows)?;
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a != 0.0 {
                    kernels::axpy(a, other.row(k), out_row);
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        check_len(self.rows, other.rows)?;
        check_len(self.cols, other.cols)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(DenseMatrix { rows: self.rows, cols: self.cols, data })
    }

    /// Adds `alpha * u u^T` in place.
    pub fn add_outer(&mut self, alpha: f64, u: &[f64]) -> Result<(), LinalgError> {
        check_len(self.rows, u.len())?;
        check_len(self.cols, u.len())?;
        for i in 0..self.rows {
            let s = alpha * u[i];
            if s != 0.0 {
                kernels::axpy(s, u, self.row_mut(i));
            }
        }
        Ok(())
    }

    pub fn add_diagonal(&mut self, alpha: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += alpha;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        kernels::norm(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A_ij - A_ji|`; infinite for non-square matrices.
    pub fn max_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.max_asymmetry() <= rel_tol * self.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    pub fn is_finite(&self) -> bool {
        kernels::all_finite(&self.data)
    }

    /// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
    pub fn sym_spectral_norm(&self) -> Result<f64, LinalgError> {
        let eig = sym_eig(self)?;
        Ok(eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// A symmetric linear map `v -> A v`.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError>;

    /// `<v, A v>`
    fn quad_form(&self, v: &[f64]) -> Result<f64, LinalgError> {
        Ok(kernels::dot(v, &self.apply(v)?))
    }
}

impl SymmetricOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.rows
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        self.matvec(v)
    }
}

/// Orthonormal basis `P` (d x k) with eigenvalues `lambda` (ascending) such
/// that a symmetric operator restricted to `span(P)` equals `P diag(lambda) P^T`.
#[derive(Debug, Clone)]
pub struct SpectralFactor {
    pub basis: DenseMatrix,
    pub eigvals: Vec<f64>,
}

impl SpectralFactor {
    pub fn rank(&self) -> usize {
        self.eigvals.len()
    }

    /// `||P^T P - I||_F`
    pub fn orthonormality_defect(&self) -> f64 {
        let k = self.basis.cols();
        let mut acc = 0.0;
        for a in 0..k {
            for b in 0..k {
                let mut s = 0.0;
                for i in 0..self.basis.rows() {
                    s += self.basis[(i, a)] * self.basis[(i, b)];
                }
                let target = if a == b { 1.0 } else { 0.0 };
                acc += (s - target) * (s - target);
            }
        }
        acc.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_ops_examples() {
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        assert_eq!(norm(&[3.0, 4.0]), 5.0);
        assert_eq!(axpy(2.0, &[1.0, 0.0], &[0.0, 1.0]).unwrap(), vec![2.0, 1.0]);
        assert_eq!(scale(3.0, &[1.0, -2.0]), vec![3.0, -6.0]);
    }

    #[test]
    fn vector_ops_reject_length_mismatch() {
        assert_eq!(dot(&[1.0], &[1.0, 2.0]), Err(LinalgError::DimensionMismatch { expected: 1, found: 2 }));
        assert!(axpy(1.0, &[1.0, 2.0, 3.0], &[1.0]).is_err());
    }

    #[test]
    fn matvec_and_transpose_agree() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(a.matvec(&[1.0, 0.0, -1.0]).unwrap(), vec![-2.0, -2.0]);
        assert_eq!(a.tr_matvec(&[1.0, 1.0]).unwrap(), a.transpose().matvec(&[1.0, 1.0]).unwrap());
        assert!(a.matvec(&[1.0]).is_err());
    }

    #[test]
    fn outer_product_update() {
        let mut m = DenseMatrix::identity(2);
        m.add_outer(2.0, &[1.0, 1.0]).unwrap();
        assert_eq!(m.as_slice(), &[3.0, 2.0, 2.0, 3.0]);
        assert!(m.is_symmetric(SYMMETRY_TOL));
    }
}
