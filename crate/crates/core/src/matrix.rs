//! Dense row-major complex matrices and an LU solver with partial pivoting.
//!
//! Device sizes stay in the low hundreds of sites, so everything here is
//! plain dense storage. Inner loops are written as row axpys over
//! contiguous slices so the compiler can vectorize them.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use thiserror::Error;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix is singular (zero pivot at column {column})")]
    Singular { column: usize },
}

/// Dense complex matrix stored row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> Complex64 {
        self.diagonal().into_iter().sum()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, MatrixError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, MatrixError> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self, MatrixError> {
        self.check_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    fn check_same_shape(&self, other: &Self) -> Result<(), MatrixError> {
        if self.shape() != other.shape() {
            return Err(MatrixError::DimensionMismatch {
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    /// Matrix product. Zero entries of `self` are skipped, so products with
    /// sparse tight-binding operators cost O(nnz * cols).
    pub fn matmul(&self, other: &Self) -> Result<Self, MatrixError> {
        if self.cols != other.rows {
            return Err(MatrixError::DimensionMismatch {
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        let n = other.cols;
        for i in 0..self.rows {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                axpy(out_row, a, &other.data[k * n..(k + 1) * n]);
            }
        }
        Ok(out)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max-norm distance `max |a_ij - b_ij|`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, MatrixError> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// `max |A - A^dagger|`, zero for exactly Hermitian matrices.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `max |A X - I|` for a square `A` and candidate inverse `X`.
    pub fn inverse_residual(&self, inverse: &Self) -> Result<f64, MatrixError> {
        let product = self.matmul(inverse)?;
        let mut worst = 0.0f64;
        for i in 0..product.rows {
            for j in 0..product.cols {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((product[(i, j)] - target).norm());
            }
        }
        Ok(worst)
    }

    pub fn lu(&self) -> Result<Lu, MatrixError> {
        Lu::factor(self.clone())
    }

    pub fn inverse(&self) -> Result<Self, MatrixError> {
        Ok(self.lu()?.inverse())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
fn axpy(y: &mut [Complex64], a: Complex64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Returns mutable row `dst` and shared row `src` of a row-major buffer.
#[inline]
fn row_pair(
    data: &mut [Complex64],
    cols: usize,
    dst: usize,
    src: usize,
) -> (&mut [Complex64], &[Complex64]) {
    debug_assert_ne!(dst, src);
    if dst > src {
        let (head, tail) = data.split_at_mut(dst * cols);
        (&mut tail[..cols], &head[src * cols..(src + 1) * cols])
    } else {
        let (head, tail) = data.split_at_mut(src * cols);
        (&mut head[dst * cols..(dst + 1) * cols], &tail[..cols])
    }
}

/// `P A = L U` with unit-diagonal `L`, both factors packed into one matrix.
#[derive(Clone, Debug)]
pub struct Lu {
    packed: CMatrix,
    // perm[i] = row of the original matrix that ended up in row i
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(mut a: CMatrix) -> Result<Self, MatrixError> {
        if !a.is_square() {
            return Err(MatrixError::NotSquare {
                rows: a.rows,
                cols: a.cols,
            });
        }
        let n = a.rows;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (pivot_row, pivot_mag) = (k..n)
                .map(|i| (i, a[(i, k)].norm_sqr()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_mag == 0.0 {
                return Err(MatrixError::Singular { column: k });
            }
            if pivot_row != k {
                for j in 0..n {
                    a.data.swap(k * n + j, pivot_row * n + j);
                }
                perm.swap(k, pivot_row);
            }
            let inv_pivot = a[(k, k)].inv();
            for i in k + 1..n {
                let factor = a[(i, k)] * inv_pivot;
                a[(i, k)] = factor;
                if factor == ZERO {
                    continue;
                }
                let (row_i, row_k) = row_pair(&mut a.data, n, i, k);
                axpy(&mut row_i[k + 1..], -factor, &row_k[k + 1..]);
            }
        }
        Ok(Self { packed: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.packed.rows
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "right-hand side length");
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.packed.row(i);
            let s: Complex64 = row[..i].iter().zip(&x[..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.packed.row(i);
            let s: Complex64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, y)| u * y).sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    /// Full inverse by forward and back substitution on the permuted identity.
    pub fn inverse(&self) -> CMatrix {
        let n = self.dim();
        let mut x = CMatrix::zeros(n, n);
        for (i, &p) in self.perm.iter().enumerate() {
            x[(i, p)] = ONE;
        }
        // L Y = P
        for i in 1..n {
            for k in 0..i {
                let l = self.packed[(i, k)];
                if l == ZERO {
                    continue;
                }
                let (row_i, row_k) = row_pair(&mut x.data, n, i, k);
                axpy(row_i, -l, row_k);
            }
        }
        // U X = Y
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = self.packed[(i, k)];
                if u == ZERO {
                    continue;
                }
                let (row_i, row_k) = row_pair(&mut x.data, n, i, k);
                axpy(row_i, -u, row_k);
            }
            let inv_diag = self.packed[(i, i)].inv();
            for v in &mut x.data[i * n..(i + 1) * n] {
                *v *= inv_diag;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn test_matrix(n: usize) -> CMatrix {
        // deterministic, diagonally weighted but not dominant
        CMatrix::from_fn(n, n, |i, j| {
            let x = (i * 7 + j * 13) as f64;
            c((x * 0.37).sin() + if i == j { 1.5 } else { 0.0 }, (x * 0.11).cos())
        })
    }

    #[test]
    fn inverse_of_identity_is_identity() {
        let id = CMatrix::identity(5);
        assert_eq!(id.inverse().unwrap(), id);
    }

    #[test]
    fn inverse_residual_is_small() {
        for n in [1, 2, 5, 17, 40] {
            let a = test_matrix(n);
            let inv = a.inverse().unwrap();
            assert!(a.inverse_residual(&inv).unwrap() < 1e-11, "n = {n}");
            assert!(inv.inverse_residual(&a).unwrap() < 1e-11, "n = {n}");
        }
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let a = CMatrix::from_fn(2, 2, |i, j| if i == j { ZERO } else { c(2.0, 1.0) });
        let inv = a.inverse().unwrap();
        assert!(a.inverse_residual(&inv).unwrap() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = CMatrix::from_fn(3, 3, |i, _| c(i as f64, 0.0));
        assert!(matches!(a.lu(), Err(MatrixError::Singular { .. })));
        assert!(matches!(
            CMatrix::zeros(2, 3).lu(),
            Err(MatrixError::NotSquare { .. })
        ));
    }

    #[test]
    fn solve_agrees_with_inverse_column() {
        let a = test_matrix(12);
        let lu = a.lu().unwrap();
        let inv = lu.inverse();
        let mut e = vec![ZERO; 12];
        e[4] = ONE;
        let x = lu.solve(&e);
        for i in 0..12 {
            assert!((x[i] - inv[(i, 4)]).norm() < 1e-13);
        }
    }

    #[test]
    fn scalar_inverse() {
        let a = CMatrix::from_diagonal(&[c(0.0, 0.2)]);
        let inv = a.inverse().unwrap();
        assert!((inv[(0, 0)] - c(0.0, -5.0)).norm() < 1e-15);
    }

    #[test]
    fn adjoint_and_hermiticity() {
        let a = test_matrix(6);
        let h = a.add(&a.adjoint()).unwrap();
        assert!(h.hermiticity_defect() < 1e-15);
        assert!(a.hermiticity_defect() > 0.1);
        assert_eq!(a.adjoint().adjoint(), a);
    }

    #[test]
    fn matmul_shape_errors() {
        let a = CMatrix::zeros(2, 3);
        assert!(a.matmul(&a).is_err());
        assert!(a.matmul(&a.transpose()).is_ok());
    }
}
