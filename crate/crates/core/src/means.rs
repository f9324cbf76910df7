//! Geometric and power means of an HPD set built on an approximate joint diagonalizer.
//!
//! With `D_k = C M_k C^H` close to diagonal, the mean is `C^{-1} E C^{-H}` where `E` is the
//! entrywise mean of `Diag(D_k)`: geometric for `p = 0`, the power mean of order `p` otherwise.

use nalgebra::DVector;

use crate::ajd::{self, AjdProblem, SolveOptions, SolveResult};
use crate::error::{Error, Result};
use crate::hpd::{HpdMatrix, MatrixFunction};
use crate::linalg;
use crate::scalar::Scalar;

/// Order of the mean, `p` in `[-1, 1]`; `p = 0` is the geometric mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanKind {
    p: f64,
}

impl MeanKind {
    pub fn new(p: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("mean order p = {p} must lie in [-1, 1]")));
        }
        Ok(Self { p })
    }

    pub fn geometric() -> Self {
        Self { p: 0.0 }
    }

    pub fn arithmetic() -> Self {
        Self { p: 1.0 }
    }

    pub fn harmonic() -> Self {
        Self { p: -1.0 }
    }

    pub fn p(self) -> f64 {
        self.p
    }

    fn combine(self, values: impl ExactSizeIterator<Item = f64>) -> f64 {
        let k = values.len() as f64;
        if self.p == 0.0 {
            (values.map(f64::ln).sum::<f64>() / k).exp()
        } else {
            (values.map(|v| v.powf(self.p)).sum::<f64>() / k).powf(1.0 / self.p)
        }
    }
}

#[derive(Clone, Debug)]
pub struct MeanOptions {
    /// Alpha of the AJD criterion.
    pub alpha: f64,
    pub solve: SolveOptions,
}

impl Default for MeanOptions {
    fn default() -> Self {
        Self { alpha: 0.0, solve: SolveOptions::default() }
    }
}

#[derive(Clone, Debug)]
pub struct MeanResult<T: Scalar> {
    pub mean: HpdMatrix<T>,
    /// Whether the underlying diagonalizer met its stopping rule.
    pub converged: bool,
    pub ajd: SolveResult<T>,
}

/// Mean of `matrices` through the LD-Newton diagonalizer started from `M_bar^{-1/2}`.
pub fn ajd_mean<T: Scalar>(matrices: &[HpdMatrix<T>], kind: MeanKind, opts: &MeanOptions) -> Result<MeanResult<T>> {
    if matrices.len() < 2 {
        return Err(Error::domain("a mean needs at least two matrices"));
    }
    let problem = AjdProblem::new(matrices.to_vec(), opts.alpha)?;
    let mbar = HpdMatrix::from_matrix(problem.mean().clone())?;
    let c0 = mbar.function(MatrixFunction::InvSqrt).into_matrix();
    let res = ajd::solve(&problem, &c0, &opts.solve)?;
    let diags: Vec<DVector<f64>> = matrices.iter().map(|m| linalg::diag_real(&linalg::congruence(&res.c, m.as_matrix()))).collect();
    let n = problem.dim();
    let e = DVector::from_fn(n, |i, _| kind.combine(diags.iter().map(|d| d[i])));
    if e.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Singular);
    }
    let cinv = res.c.clone().try_inverse().ok_or(Error::Singular)?;
    let mut mean = linalg::congruence(&cinv, &linalg::from_diag::<T>(&e));
    linalg::mirror_lower(&mut mean);
    let mean = HpdMatrix::from_matrix(mean)?;
    Ok(MeanResult { mean, converged: res.converged, ajd: res })
}
