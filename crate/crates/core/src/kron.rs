//! Column-major vectorization, Kronecker products and structured 0/1 matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Stacks the columns of `m`.
pub fn vec<T: Scalar>(m: &DMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvec<T: Scalar>(v: &DVector<T>, rows: usize, cols: usize) -> Result<DMatrix<T>> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch { expected: rows * cols, found: v.len() });
    }
    Ok(DMatrix::from_column_slice(rows, cols, v.as_slice()))
}

pub fn kron<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    a.kronecker(b)
}

/// Square 0/1 matrix with at most one nonzero per row and per column, kept as an index map.
///
/// `source[row] = Some(col)` means entry `(row, col)` is one. Commutation matrices are full
/// permutations; the diagonal selector leaves rows empty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructuredPermutation {
    source: Vec<Option<usize>>,
}

impl StructuredPermutation {
    pub fn new(source: Vec<Option<usize>>) -> Result<Self> {
        let n = source.len();
        let mut seen = vec![false; n];
        for &s in source.iter().flatten() {
            if s >= n || seen[s] {
                return Err(Error::domain("index map must hit each column at most once"));
            }
            seen[s] = true;
        }
        Ok(Self { source })
    }

    pub fn dim(&self) -> usize {
        self.source.len()
    }

    pub fn source(&self) -> &[Option<usize>] {
        &self.source
    }

    pub fn is_permutation(&self) -> bool {
        self.source.iter().all(Option::is_some)
    }

    pub fn apply<T: Scalar>(&self, v: &DVector<T>) -> DVector<T> {
        DVector::from_iterator(self.dim(), self.source.iter().map(|s| s.map_or(T::zero(), |j| v[j])))
    }

    /// `P^T v`.
    pub fn apply_transpose<T: Scalar>(&self, v: &DVector<T>) -> DVector<T> {
        let mut out = DVector::zeros(self.dim());
        for (row, s) in self.source.iter().enumerate() {
            if let Some(j) = s {
                out[*j] = v[row];
            }
        }
        out
    }

    pub fn transpose(&self) -> StructuredPermutation {
        let mut t = vec![None; self.dim()];
        for (row, s) in self.source.iter().enumerate() {
            if let Some(j) = s {
                t[*j] = Some(row);
            }
        }
        StructuredPermutation { source: t }
    }

    pub fn to_dense<T: Scalar>(&self) -> DMatrix<T> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (row, s) in self.source.iter().enumerate() {
            if let Some(j) = s {
                m[(row, *j)] = T::one();
            }
        }
        m
    }
}

/// `P_{m x n}` with `P vec(Z) = vec(Z^T)` for `Z` of size `m x n`.
pub fn commutation_matrix(m: usize, n: usize) -> StructuredPermutation {
    let mut source = vec![None; m * n];
    for i in 0..m {
        for j in 0..n {
            source[j + n * i] = Some(i + m * j);
        }
    }
    StructuredPermutation { source }
}

/// `P_Diag` with `P vec(Z) = vec(Diag Z)` for `n x n` matrices.
pub fn diag_projection(n: usize) -> StructuredPermutation {
    let mut source = vec![None; n * n];
    for i in 0..n {
        source[i * (n + 1)] = Some(i * (n + 1));
    }
    StructuredPermutation { source }
}
