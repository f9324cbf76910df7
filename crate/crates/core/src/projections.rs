//! Closest diagonal matrices under several divergences.
//!
//! Each criterion pairs a divergence `D(A, X)` with its minimizer over positive diagonal `X`:
//!
//! | criterion            | divergence `D(A, X)`                           | minimizer                        |
//! |----------------------|------------------------------------------------|----------------------------------|
//! | `Frobenius`          | `1/2 ||A - X||_F^2`                            | `Diag A`                         |
//! | `KLRight`            | `tr(X^{-1} A) - n - log det(X^{-1} A)`         | `Diag A`                         |
//! | `KLLeft`             | `tr(A^{-1} X) - n - log det(A^{-1} X)`         | `(Diag A^{-1})^{-1}`             |
//! | `KLSymmetric`        | average of the two above                       | `Diag(A)^{1/2} Diag(A^{-1})^{-1/2}` |
//! | `Riemannian`         | `1/2 ||log(A^{-1/2} X A^{-1/2})||_F^2`         | iterative                        |
//! | `LogDetAlphaRight(a)`| log-det alpha-divergence `D^a(A, X)`           | iterative                        |
//!
//! `LogDetAlphaRight` tends to `KLRight` as `a -> 1` and to `KLLeft` as `a -> -1`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hpd::{logdet_alpha_divergence, riemannian_distance, DiagonalPdMatrix, HpdMatrix, ALPHA_ENDPOINT_BAND};
use crate::linalg;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProjectionCriterion {
    Frobenius,
    Riemannian,
    KLRight,
    KLLeft,
    KLSymmetric,
    LogDetAlphaRight(f64),
    Bhattacharyya,
}

impl ProjectionCriterion {
    pub fn validate(&self) -> Result<()> {
        if let ProjectionCriterion::LogDetAlphaRight(alpha) = *self {
            if !(-1.0..=1.0).contains(&alpha) {
                return Err(Error::domain(format!("alpha = {alpha} is outside [-1, 1]")));
            }
        }
        Ok(())
    }

    fn resolved(self) -> ProjectionCriterion {
        match self {
            ProjectionCriterion::Bhattacharyya => ProjectionCriterion::LogDetAlphaRight(0.0),
            ProjectionCriterion::LogDetAlphaRight(a) if a >= 1.0 - ALPHA_ENDPOINT_BAND => ProjectionCriterion::KLRight,
            ProjectionCriterion::LogDetAlphaRight(a) if a <= -1.0 + ALPHA_ENDPOINT_BAND => ProjectionCriterion::KLLeft,
            c => c,
        }
    }

    pub fn has_closed_form(&self) -> bool {
        !matches!(self.resolved(), ProjectionCriterion::Riemannian | ProjectionCriterion::LogDetAlphaRight(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationReport {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct ProjectionOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting diagonal for the iterative criteria; `Diag A` when `None`.
    pub start: Option<DVector<f64>>,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 500, start: None }
    }
}

#[derive(Clone, Debug)]
pub struct Projection {
    pub diag: DiagonalPdMatrix,
    pub report: IterationReport,
}

pub fn closest_diagonal<T: Scalar>(a: &HpdMatrix<T>, criterion: ProjectionCriterion) -> Result<Projection> {
    closest_diagonal_with(a, criterion, &ProjectionOptions::default())
}

pub fn closest_diagonal_with<T: Scalar>(
    a: &HpdMatrix<T>,
    criterion: ProjectionCriterion,
    opts: &ProjectionOptions,
) -> Result<Projection> {
    criterion.validate()?;
    let exact = |d: DVector<f64>| Projection {
        diag: DiagonalPdMatrix::new_unchecked(d),
        report: IterationReport { iterations: 0, residual: 0.0, converged: true },
    };
    let diag_a = linalg::diag_real(a.as_matrix());
    match criterion.resolved() {
        ProjectionCriterion::Frobenius | ProjectionCriterion::KLRight => Ok(exact(diag_a)),
        ProjectionCriterion::KLLeft => Ok(exact(diag_of_inverse(a).map(|v| 1.0 / v))),
        ProjectionCriterion::KLSymmetric => {
            let di = diag_of_inverse(a);
            Ok(exact(diag_a.zip_map(&di, |x, y| (x / y).sqrt())))
        }
        ProjectionCriterion::Riemannian => riemannian_projection(a, start(opts, &diag_a)?, opts),
        ProjectionCriterion::LogDetAlphaRight(alpha) => alpha_projection(a, alpha, start(opts, &diag_a)?, opts),
        ProjectionCriterion::Bhattacharyya => unreachable!(),
    }
}

fn start(opts: &ProjectionOptions, diag_a: &DVector<f64>) -> Result<DVector<f64>> {
    match &opts.start {
        Some(s) => {
            crate::hpd::check_same_dim(diag_a.len(), s.len())?;
            Ok(DiagonalPdMatrix::new(s.clone())?.entries().clone())
        }
        None => Ok(diag_a.clone()),
    }
}

fn diag_of_inverse<T: Scalar>(a: &HpdMatrix<T>) -> DVector<f64> {
    linalg::diag_real(a.inverse().as_matrix())
}

/// Divergence paired with `criterion`, evaluated at the diagonal `x`.
pub fn criterion_divergence<T: Scalar>(a: &HpdMatrix<T>, x: &DiagonalPdMatrix, criterion: ProjectionCriterion) -> Result<f64> {
    criterion.validate()?;
    crate::hpd::check_same_dim(a.dim(), x.dim())?;
    let xm: HpdMatrix<T> = x.to_hpd();
    match criterion.resolved() {
        ProjectionCriterion::Frobenius => Ok(0.5 * linalg::frobenius_sq(&(a.as_matrix() - xm.as_matrix()))),
        ProjectionCriterion::Riemannian => Ok(0.5 * riemannian_distance(a, &xm)?.powi(2)),
        ProjectionCriterion::KLRight => logdet_alpha_divergence(a, &xm, 1.0),
        ProjectionCriterion::KLLeft => logdet_alpha_divergence(a, &xm, -1.0),
        ProjectionCriterion::KLSymmetric => {
            let n = a.dim() as f64;
            let tr1: f64 = linalg::diag_real(a.as_matrix()).component_div(x.entries()).sum();
            let tr2: f64 = diag_of_inverse(a).component_mul(x.entries()).sum();
            Ok(0.5 * (tr1 + tr2) - n)
        }
        ProjectionCriterion::LogDetAlphaRight(alpha) => logdet_alpha_divergence(a, &xm, alpha),
        ProjectionCriterion::Bhattacharyya => unreachable!(),
    }
}

/// Divergence from `a` to its closest diagonal matrix.
pub fn true_diagonality<T: Scalar>(a: &HpdMatrix<T>, criterion: ProjectionCriterion) -> Result<f64> {
    let p = closest_diagonal(a, criterion)?;
    criterion_divergence(a, &p.diag, criterion)
}

/// A trial point is accepted if it lowers the objective, or if the objective change is lost in
/// rounding and the stationarity residual drops instead.
fn accept(obj: f64, trial: f64, scale: f64, residual: f64, trial_residual: f64) -> bool {
    if trial < obj {
        return true;
    }
    trial - obj <= 64.0 * f64::EPSILON * scale.max(1.0) && trial_residual < residual
}

/// `Diag(log(X^{1/2} M X^{1/2}))` with `M = A^{-1}`, plus the objective `1/2 ||log(.)||_F^2`.
fn riemannian_gradient<T: Scalar>(m: &DMatrix<T>, x: &DVector<f64>) -> (DVector<f64>, f64) {
    let s = x.map(f64::sqrt);
    let p = linalg::scale_rows_cols(m, &s, &s);
    let (vals, vecs) = linalg::eigh(&p);
    let obj = 0.5 * vals.iter().map(|l| l.ln().powi(2)).sum::<f64>();
    let log_p = linalg::spectral(&vals, &vecs, f64::ln);
    (linalg::diag_real(&log_p), obj)
}

fn riemannian_projection<T: Scalar>(a: &HpdMatrix<T>, mut x: DVector<f64>, opts: &ProjectionOptions) -> Result<Projection> {
    let m = a.inverse().into_matrix();
    let (mut g, mut obj) = riemannian_gradient(&m, &x);
    let mut report = IterationReport { iterations: 0, residual: g.norm(), converged: false };
    while report.iterations < opts.max_iter && report.residual > opts.tol {
        let mut r = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = x.zip_map(&g, |xi, gi| xi * (1.0 - r * gi));
            if trial.iter().all(|v| *v > 0.0 && v.is_finite()) {
                let (tg, tobj) = riemannian_gradient(&m, &trial);
                if accept(obj, tobj, obj.abs(), report.residual, tg.norm()) {
                    accepted = Some((trial, tg, tobj));
                    break;
                }
            }
            r *= 0.5;
        }
        let Some((nx, ng, nobj)) = accepted else { break };
        x = nx;
        g = ng;
        obj = nobj;
        report.iterations += 1;
        report.residual = g.norm();
    }
    report.converged = report.residual <= opts.tol;
    Ok(Projection { diag: DiagonalPdMatrix::new_unchecked(x), report })
}

/// Objective and `(x_i [(aA + bX)^{-1}]_ii - 1)_i`, a positive multiple of the gradient in `log x`.
fn alpha_state<T: Scalar>(a: &HpdMatrix<T>, alpha: f64, x: &DVector<f64>, logdet_a: f64) -> Option<(f64, DVector<f64>, f64)> {
    let (ca, cb) = ((1.0 - alpha) / 2.0, (1.0 + alpha) / 2.0);
    let mut mix = a.as_matrix() * T::from_real(ca);
    for i in 0..x.len() {
        mix[(i, i)] += T::from_real(cb * x[i]);
    }
    let chol = linalg::cholesky(&mix)?;
    let ld_mix = linalg::chol_logdet(&chol);
    let p = linalg::diag_real(&chol.inverse());
    let ld_x: f64 = x.iter().map(|v| v.ln()).sum();
    let obj = 4.0 / (1.0 - alpha * alpha) * (ld_mix - ca * logdet_a - cb * ld_x);
    let dir = x.zip_map(&p, |xi, pi| xi * pi - 1.0);
    let residual = p.zip_map(x, |pi, xi| pi - 1.0 / xi).norm();
    Some((obj, dir, residual))
}

fn alpha_projection<T: Scalar>(a: &HpdMatrix<T>, alpha: f64, mut x: DVector<f64>, opts: &ProjectionOptions) -> Result<Projection> {
    let logdet_a = a.logdet();
    let noise_scale = 4.0 / (1.0 - alpha * alpha) * (logdet_a.abs() + linalg::diag_real(a.as_matrix()).map(|v| v.ln().abs()).sum());
    let (mut obj, mut dir, residual) = alpha_state(a, alpha, &x, logdet_a).ok_or(Error::Singular)?;
    let mut report = IterationReport { iterations: 0, residual, converged: false };
    while report.iterations < opts.max_iter && report.residual > opts.tol {
        let mut r = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = x.zip_map(&dir, |xi, di| xi * (-r * di).exp());
            if let Some(state) = alpha_state(a, alpha, &trial, logdet_a) {
                if accept(obj, state.0, noise_scale, report.residual, state.2) {
                    accepted = Some((trial, state));
                    break;
                }
            }
            r *= 0.5;
        }
        let Some((nx, (nobj, ndir, nres))) = accepted else { break };
        x = nx;
        obj = nobj;
        dir = ndir;
        report.iterations += 1;
        report.residual = nres;
    }
    report.converged = report.residual <= opts.tol;
    Ok(Projection { diag: DiagonalPdMatrix::new_unchecked(x), report })
}
