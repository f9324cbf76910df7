//! Random test matrices.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::hpd::HpdMatrix;
use crate::linalg;
use crate::scalar::Scalar;

/// Standard normal entries; complex entries have independent parts of variance 1/2.
pub fn gaussian<T: Scalar, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<T> {
    let scale = if T::IS_COMPLEX { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = if T::IS_COMPLEX { StandardNormal.sample(rng) } else { 0.0 };
        T::from_parts(re * scale, im * scale)
    })
}

/// `G G^H / n + ridge I` with Gaussian `G`.
pub fn hpd<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize, ridge: f64) -> HpdMatrix<T> {
    let g = gaussian::<T, R>(rng, n, n);
    let mut m = &g * g.adjoint() * T::from_real(1.0 / n as f64);
    for i in 0..n {
        m[(i, i)] += T::from_real(ridge);
    }
    linalg::mirror_lower(&mut m);
    HpdMatrix::from_matrix_unchecked(m)
}

/// `U diag(l) U^H` with Haar-like unitary `U` and eigenvalues log-uniform on `[1, cond]`.
pub fn hpd_with_condition<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize, cond: f64) -> HpdMatrix<T> {
    let u = unitary::<T, R>(rng, n);
    let l = DVector::from_fn(n, |i, _| if n == 1 { 1.0 } else { cond.powf(i as f64 / (n - 1) as f64) });
    HpdMatrix::from_matrix_unchecked(linalg::spectral(&l, &u, |v| v))
}

pub fn unitary<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<T> {
    let g = gaussian::<T, R>(rng, n, n);
    g.qr().q()
}

/// `I + scale * G` with Gaussian `G`.
pub fn near_identity<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> DMatrix<T> {
    DMatrix::identity(n, n) + gaussian::<T, R>(rng, n, n) * T::from_real(scale)
}

pub fn positive_diagonal<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| (rng.random::<f64>() * (hi / lo).ln()).exp() * lo)
}
