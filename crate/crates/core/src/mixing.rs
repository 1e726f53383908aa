//! The mixing matrix `A` of the model `x = A s`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensors::SymMat;

/// Real `I x J` mixing matrix, one column per source.
///
/// Columns may carry arbitrary scale (the cumulants depend on it); use
/// [`MixingMatrix::canonical`] for the unit-norm, sign-fixed representative
/// that identifiability is stated for.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix<T: Scalar> {
    mat: DMatrix<T>,
}

impl<T: Scalar> MixingMatrix<T> {
    pub fn new(mat: DMatrix<T>) -> Self {
        Self { mat }
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[T]) -> Self {
        Self { mat: DMatrix::from_row_slice(rows, cols, data) }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<T>]) -> Result<Self> {
        let rows = cols.first().map_or(0, Vec::len);
        if let Some(bad) = cols.iter().find(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch { expected: rows, found: bad.len() });
        }
        Ok(Self { mat: DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i]) })
    }

    pub fn rows(&self) -> usize {
        self.mat.nrows()
    }

    pub fn cols(&self) -> usize {
        self.mat.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.mat
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.mat.column(j).iter().copied().collect()
    }

    pub fn columns(&self) -> Vec<Vec<T>> {
        (0..self.cols()).map(|j| self.column(j)).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[T]) {
        self.mat.set_column(j, &DVector::from_column_slice(v));
    }

    /// Unit-norm columns with the largest-magnitude entry of each positive.
    /// Zero columns are left untouched.
    pub fn canonical(&self) -> Self {
        let mut mat = self.mat.clone();
        for mut col in mat.column_iter_mut() {
            let v: Vec<T> = col.iter().copied().collect();
            let c = canonical_direction(&v);
            for (dst, src) in col.iter_mut().zip(c) {
                *dst = src;
            }
        }
        Self { mat }
    }

    /// Every column has unit norm and canonical sign.
    pub fn is_canonical(&self, tol: T) -> bool {
        self.columns().iter().all(|c| {
            let n = norm(c);
            (n - T::one()).abs() <= tol && canonical_direction(c).iter().zip(c).all(|(a, b)| (*a - *b).abs() <= tol)
        })
    }

    /// Largest absolute cosine between two distinct columns.
    pub fn max_abs_cosine(&self) -> T {
        let cols = self.columns();
        let mut best = T::zero();
        for i in 0..cols.len() {
            for j in i + 1..cols.len() {
                best = best.max(abs_cosine(&cols[i], &cols[j]));
            }
        }
        best
    }

    /// No two columns have `|cos| >= 1 - tol`.
    pub fn no_collinear_pair(&self, tol: T) -> bool {
        self.max_abs_cosine() < T::one() - tol
    }

    /// Columns `a_j a_j^T` in packed form.
    pub fn squared_columns(&self) -> Vec<SymMat<T>> {
        self.columns().iter().map(|c| SymMat::outer(c)).collect()
    }

    /// Khatri-Rao square in isometric packed coordinates, `C(I+1,2) x J`.
    pub fn khatri_rao_weighted(&self) -> DMatrix<T> {
        let sq = self.squared_columns();
        let m = crate::tensors::packed_len2(self.rows());
        let mut out = DMatrix::zeros(m, self.cols());
        for (j, s) in sq.iter().enumerate() {
            out.set_column(j, &s.to_weighted());
        }
        out
    }

    /// Khatri-Rao square in plain packed coordinates `z_ij = a_i a_j`, `i <= j`.
    pub fn khatri_rao_packed(&self) -> DMatrix<T> {
        let sq = self.squared_columns();
        let m = crate::tensors::packed_len2(self.rows());
        DMatrix::from_fn(m, self.cols(), |p, j| sq[j].packed()[p])
    }

    /// Permutes the coordinates (rows): row `i` of the result is row `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        Self { mat: DMatrix::from_fn(self.rows(), self.cols(), |i, j| self.mat[(perm[i], j)]) }
    }
}

pub(crate) fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |a, &x| a + x * x).sqrt()
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `|<a, b>| / (|a| |b|)`, zero if either vector vanishes.
pub fn abs_cosine<T: Scalar>(a: &[T], b: &[T]) -> T {
    cosine(a, b).abs()
}

pub fn cosine<T: Scalar>(a: &[T], b: &[T]) -> T {
    let na = norm(a);
    let nb = norm(b);
    if na == T::zero() || nb == T::zero() {
        return T::zero();
    }
    dot(a, b) / (na * nb)
}

/// Unit vector along `v` whose largest-magnitude entry is positive
/// (first such entry on ties).
pub fn canonical_direction<T: Scalar>(v: &[T]) -> Vec<T> {
    let n = norm(v);
    if n == T::zero() {
        return v.to_vec();
    }
    let mut arg = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[arg].abs() {
            arg = i;
        }
    }
    let s = if v[arg] < T::zero() { -n } else { n };
    v.iter().map(|&x| x / s).collect()
}
