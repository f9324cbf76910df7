//! Dense helpers shared by the modules. Inputs are assumed square.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::scalar::Scalar;

/// Copies the lower triangle onto the upper one and zeroes the imaginary part of the diagonal.
pub fn mirror_lower<T: Scalar>(m: &mut DMatrix<T>) {
    let n = m.nrows();
    for j in 0..n {
        m[(j, j)] = T::from_real(m[(j, j)].real());
        for i in (j + 1)..n {
            m[(j, i)] = m[(i, j)].conjugate();
        }
    }
}

/// `(m + m^H) / 2`, exactly Hermitian.
pub fn hermitian_part<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let n = m.nrows();
    let half = T::from_real(0.5);
    let mut out = m.clone();
    for j in 0..n {
        out[(j, j)] = T::from_real(m[(j, j)].real());
        for i in (j + 1)..n {
            let v = (m[(i, j)] + m[(j, i)].conjugate()) * half;
            out[(i, j)] = v;
            out[(j, i)] = v.conjugate();
        }
    }
    out
}

pub fn max_abs<T: Scalar>(m: &DMatrix<T>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.modulus()))
}

pub fn asymmetry<T: Scalar>(m: &DMatrix<T>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in j..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conjugate()).modulus());
        }
    }
    worst
}

pub fn cholesky<T: Scalar>(m: &DMatrix<T>) -> Option<Cholesky<T, Dyn>> {
    Cholesky::new(m.clone())
}

/// `log det m` for a Hermitian positive-definite `m`; `None` if the factorization fails.
pub fn logdet_hpd<T: Scalar>(m: &DMatrix<T>) -> Option<f64> {
    let chol = cholesky(m)?;
    Some(chol_logdet(&chol))
}

pub fn chol_logdet<T: Scalar>(chol: &Cholesky<T, Dyn>) -> f64 {
    let l = chol.l_dirty();
    (0..l.nrows()).map(|i| l[(i, i)].real().ln()).sum::<f64>() * 2.0
}

/// Inverse of a Hermitian positive-definite matrix, returned exactly Hermitian.
pub fn inverse_hpd<T: Scalar>(m: &DMatrix<T>) -> Option<DMatrix<T>> {
    let chol = cholesky(m)?;
    let mut inv = chol.inverse();
    mirror_lower(&mut inv);
    Some(inv)
}

pub fn eigh<T: Scalar>(m: &DMatrix<T>) -> (DVector<f64>, DMatrix<T>) {
    let eig = SymmetricEigen::new(m.clone());
    (eig.eigenvalues, eig.eigenvectors)
}

pub fn eigvalsh<T: Scalar>(m: &DMatrix<T>) -> DVector<f64> {
    m.clone().symmetric_eigenvalues()
}

/// `V f(Λ) V^H` from an eigendecomposition, exactly Hermitian.
pub fn spectral<T: Scalar>(vals: &DVector<f64>, vecs: &DMatrix<T>, f: impl Fn(f64) -> f64) -> DMatrix<T> {
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        let fl = T::from_real(f(l));
        scaled.column_mut(j).iter_mut().for_each(|v| *v *= fl);
    }
    let mut out = &scaled * vecs.adjoint();
    mirror_lower(&mut out);
    out
}

pub fn diag_real<T: Scalar>(m: &DMatrix<T>) -> DVector<f64> {
    DVector::from_iterator(m.nrows(), (0..m.nrows()).map(|i| m[(i, i)].real()))
}

pub fn from_diag<T: Scalar>(d: &DVector<f64>) -> DMatrix<T> {
    let n = d.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = T::from_real(d[i]);
    }
    m
}

/// `D^{1/2} m D^{1/2}` style scaling: entry `(i, j)` multiplied by `l[i] * r[j]`.
pub fn scale_rows_cols<T: Scalar>(m: &DMatrix<T>, l: &DVector<f64>, r: &DVector<f64>) -> DMatrix<T> {
    let mut out = m.clone();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out[(i, j)] *= T::from_real(l[i] * r[j]);
        }
    }
    out
}

/// `c m c^H`, exactly Hermitian.
pub fn congruence<T: Scalar>(c: &DMatrix<T>, m: &DMatrix<T>) -> DMatrix<T> {
    let mut out = c * m * c.adjoint();
    mirror_lower(&mut out);
    out
}

pub fn frobenius_sq<T: Scalar>(m: &DMatrix<T>) -> f64 {
    m.iter().map(|v| v.modulus_squared()).sum()
}

pub fn trace_real<T: Scalar>(m: &DMatrix<T>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].real()).sum()
}
