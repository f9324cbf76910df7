//! Hermitian and Hermitian positive-definite matrix types and their basic operations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Relative tolerance used for structural checks.
pub const DEFAULT_RTOL: f64 = 1e-10;

/// Square matrix stored in full, with the upper triangle exactly the conjugate of the lower one.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix<T: Scalar> {
    data: DMatrix<T>,
}

impl<T: Scalar> HermitianMatrix<T> {
    /// Accepts `m` if it is Hermitian to a relative tolerance of 1e-10, then symmetrizes it exactly.
    pub fn new(m: DMatrix<T>) -> Result<Self> {
        check_square(&m)?;
        let scale = linalg::max_abs(&m).max(f64::MIN_POSITIVE);
        let asym = linalg::asymmetry(&m);
        if !(asym <= DEFAULT_RTOL * scale) {
            return Err(Error::NotHermitian { asymmetry: asym });
        }
        Ok(Self { data: linalg::hermitian_part(&m) })
    }

    /// Builds the matrix from the lower triangle of `m`; the upper triangle is ignored.
    pub fn from_lower(mut m: DMatrix<T>) -> Result<Self> {
        check_square(&m)?;
        linalg::mirror_lower(&mut m);
        Ok(Self { data: m })
    }

    pub fn identity(n: usize) -> Self {
        Self { data: DMatrix::identity(n, n) }
    }

    pub(crate) fn from_hermitian_unchecked(data: DMatrix<T>) -> Self {
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.data
    }

    /// Eigenvalues in the order returned by the solver, with matching eigenvectors.
    pub fn eigh(&self) -> (DVector<f64>, DMatrix<T>) {
        linalg::eigh(&self.data)
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        linalg::eigvalsh(&self.data)
    }
}

/// Hermitian matrix whose smallest eigenvalue exceeds `n * eps * ||A||_2`.
#[derive(Clone, Debug, PartialEq)]
pub struct HpdMatrix<T: Scalar> {
    inner: HermitianMatrix<T>,
}

impl<T: Scalar> HpdMatrix<T> {
    pub fn new(h: HermitianMatrix<T>) -> Result<Self> {
        let n = h.dim();
        if n == 0 {
            return Err(Error::domain("empty matrix"));
        }
        if h.data.iter().any(|v| !v.real().is_finite() || !v.imaginary().is_finite()) {
            return Err(Error::domain("matrix has non-finite entries"));
        }
        let chol_ok = linalg::cholesky(&h.data).is_some();
        let eig = h.eigenvalues();
        let lmin = eig.min();
        let norm = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let threshold = n as f64 * f64::EPSILON * norm;
        if !chol_ok || !(lmin > threshold) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: lmin, threshold });
        }
        Ok(Self { inner: h })
    }

    /// Checks Hermitian symmetry and positive definiteness of a full matrix.
    pub fn from_matrix(m: DMatrix<T>) -> Result<Self> {
        Self::new(HermitianMatrix::new(m)?)
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<T>) -> Self {
        Self { inner: HermitianMatrix { data: m } }
    }

    pub fn identity(n: usize) -> Self {
        Self { inner: HermitianMatrix::identity(n) }
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn as_matrix(&self) -> &DMatrix<T> {
        &self.inner.data
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix<T> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.inner.data
    }

    pub fn diag(&self) -> DiagonalPdMatrix {
        DiagonalPdMatrix { d: linalg::diag_real(&self.inner.data) }
    }

    pub fn logdet(&self) -> f64 {
        linalg::logdet_hpd(&self.inner.data).unwrap_or_else(|| self.eigenvalues().iter().map(|l| l.ln()).sum())
    }

    pub fn inverse(&self) -> HpdMatrix<T> {
        let inv = linalg::inverse_hpd(&self.inner.data)
            .unwrap_or_else(|| {
                let (vals, vecs) = self.inner.eigh();
                linalg::spectral(&vals, &vecs, |l| 1.0 / l)
            });
        Self::from_matrix_unchecked(inv)
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        self.inner.eigenvalues()
    }

    pub fn function(&self, f: MatrixFunction) -> HpdMatrix<T> {
        let (vals, vecs) = self.inner.eigh();
        Self::from_matrix_unchecked(linalg::spectral(&vals, &vecs, |l| f.apply(l)))
    }
}

/// Diagonal matrix with strictly positive, finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalPdMatrix {
    d: DVector<f64>,
}

impl DiagonalPdMatrix {
    pub fn new(d: DVector<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::domain("empty diagonal"));
        }
        if let Some(bad) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::domain(format!("diagonal entry {bad} is not positive and finite")));
        }
        Ok(Self { d })
    }

    pub(crate) fn new_unchecked(d: DVector<f64>) -> Self {
        Self { d }
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn entries(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn to_dense<T: Scalar>(&self) -> DMatrix<T> {
        linalg::from_diag(&self.d)
    }

    pub fn to_hpd<T: Scalar>(&self) -> HpdMatrix<T> {
        HpdMatrix::from_matrix_unchecked(self.to_dense())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DiagonalPdMatrix {
        DiagonalPdMatrix { d: self.d.map(f) }
    }
}

/// `A_hat = D^{-1/2} A D^{-1/2}` together with `D^{1/2}`, so that `A = D^{1/2} A_hat D^{1/2}`.
#[derive(Clone, Debug)]
pub struct CorrelationForm<T: Scalar> {
    pub a_hat: HpdMatrix<T>,
    pub sqrt_diag: DVector<f64>,
}

impl<T: Scalar> CorrelationForm<T> {
    /// Hollow part `A_hat - I`.
    pub fn a_tilde(&self) -> DMatrix<T> {
        let mut t = self.a_hat.as_matrix().clone();
        for i in 0..t.nrows() {
            t[(i, i)] = T::zero();
        }
        t
    }

    pub fn reconstruct(&self) -> DMatrix<T> {
        linalg::scale_rows_cols(self.a_hat.as_matrix(), &self.sqrt_diag, &self.sqrt_diag)
    }
}

/// Spectral functions of Hermitian matrices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MatrixFunction {
    Exp,
    Log,
    Sqrt,
    InvSqrt,
    Pow(f64),
}

impl MatrixFunction {
    pub fn apply(self, l: f64) -> f64 {
        match self {
            MatrixFunction::Exp => l.exp(),
            MatrixFunction::Log => l.ln(),
            MatrixFunction::Sqrt => l.sqrt(),
            MatrixFunction::InvSqrt => 1.0 / l.sqrt(),
            MatrixFunction::Pow(p) => l.powf(p),
        }
    }

    fn needs_positive(self) -> bool {
        !matches!(self, MatrixFunction::Exp)
    }
}

/// Real diagonal of a Hermitian matrix.
pub fn diag_part<T: Scalar>(a: &HermitianMatrix<T>) -> DVector<f64> {
    linalg::diag_real(a.as_matrix())
}

pub fn correlation_scale<T: Scalar>(a: &HpdMatrix<T>) -> CorrelationForm<T> {
    let sqrt_diag = linalg::diag_real(a.as_matrix()).map(f64::sqrt);
    let inv = sqrt_diag.map(|v| 1.0 / v);
    let mut a_hat = linalg::scale_rows_cols(a.as_matrix(), &inv, &inv);
    for i in 0..a_hat.nrows() {
        a_hat[(i, i)] = T::one();
    }
    linalg::mirror_lower(&mut a_hat);
    CorrelationForm { a_hat: HpdMatrix::from_matrix_unchecked(a_hat), sqrt_diag }
}

/// `f(A)` through the eigendecomposition. All functions except `Exp` require `A` positive definite.
pub fn matrix_function<T: Scalar>(a: &HermitianMatrix<T>, f: MatrixFunction) -> Result<HermitianMatrix<T>> {
    let (vals, vecs) = a.eigh();
    if f.needs_positive() {
        let lmin = vals.min();
        if !(lmin > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: lmin, threshold: 0.0 });
        }
    }
    Ok(HermitianMatrix::from_hermitian_unchecked(linalg::spectral(&vals, &vecs, |l| f.apply(l))))
}

/// `||log(P1^{-1/2} P2 P1^{-1/2})||_F`.
pub fn riemannian_distance<T: Scalar>(p1: &HpdMatrix<T>, p2: &HpdMatrix<T>) -> Result<f64> {
    check_same_dim(p1.dim(), p2.dim())?;
    let w = p1.function(MatrixFunction::InvSqrt);
    let inner = linalg::congruence(w.as_matrix(), p2.as_matrix());
    let vals = linalg::eigvalsh(&inner);
    Ok(vals.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt())
}

/// Width of the band around `|alpha| = 1` inside which the exact Kullback-Leibler branch is used.
pub const ALPHA_ENDPOINT_BAND: f64 = 1e-6;

/// Log-det alpha-divergence for `alpha` in `[-1, 1]`.
///
/// Interior: `4/(1-a^2) log det((1-a)/2 P1 + (1+a)/2 P2) / (det P1^{(1-a)/2} det P2^{(1+a)/2})`.
/// At `alpha = -1`: `tr(P1^{-1} P2) - n - log det(P1^{-1} P2)`; at `alpha = 1` the arguments swap.
pub fn logdet_alpha_divergence<T: Scalar>(p1: &HpdMatrix<T>, p2: &HpdMatrix<T>, alpha: f64) -> Result<f64> {
    check_same_dim(p1.dim(), p2.dim())?;
    check_alpha_closed(alpha)?;
    if alpha <= -1.0 + ALPHA_ENDPOINT_BAND {
        return Ok(kl(p1, p2));
    }
    if alpha >= 1.0 - ALPHA_ENDPOINT_BAND {
        return Ok(kl(p2, p1));
    }
    let a = (1.0 - alpha) / 2.0;
    let b = (1.0 + alpha) / 2.0;
    let mix = p1.as_matrix() * T::from_real(a) + p2.as_matrix() * T::from_real(b);
    let ld_mix = linalg::logdet_hpd(&mix).ok_or(Error::Singular)?;
    Ok(4.0 / (1.0 - alpha * alpha) * (ld_mix - a * p1.logdet() - b * p2.logdet()))
}

/// `tr(P^{-1} Q) - n - log det(P^{-1} Q)`.
fn kl<T: Scalar>(p: &HpdMatrix<T>, q: &HpdMatrix<T>) -> f64 {
    let n = p.dim() as f64;
    let tr = match linalg::cholesky(p.as_matrix()) {
        Some(ch) => linalg::trace_real(&ch.solve(q.as_matrix())),
        None => linalg::trace_real(&(p.inverse().as_matrix() * q.as_matrix())),
    };
    tr - n - q.logdet() + p.logdet()
}

pub(crate) fn check_alpha_closed(alpha: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&alpha) {
        return Err(Error::domain(format!("alpha = {alpha} is outside [-1, 1]")));
    }
    Ok(())
}

pub(crate) fn check_square<T: Scalar>(m: &DMatrix<T>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(())
}

pub(crate) fn check_same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
