//! Pham's Jacobi-like joint diagonalization of positive-definite matrices (non-orthogonal).
//!
//! One iteration is a full sweep over index pairs; each pair update minimizes the weighted sum of
//! left Kullback-Leibler diagonality measures restricted to a 2x2 transformation.

use nalgebra::DMatrix;

use super::{check_invertible, cost_unchecked, gradient, stop_statistic, AjdProblem, SolveOptions, SolveResult, TraceEntry};
use crate::error::{Error, Result};
use crate::hpd::check_same_dim;
use crate::linalg;
use crate::scalar::Scalar;

pub fn jadiag<T: Scalar>(problem: &AjdProblem<T>, c0: &DMatrix<T>, opts: &SolveOptions) -> Result<SolveResult<T>> {
    jadiag_with_observer(problem, c0, opts, |_, _| {})
}

pub fn jadiag_with_observer<T: Scalar>(
    problem: &AjdProblem<T>,
    c0: &DMatrix<T>,
    opts: &SolveOptions,
    mut observer: impl FnMut(usize, &DMatrix<T>),
) -> Result<SolveResult<T>> {
    opts.validate()?;
    check_same_dim(problem.dim(), c0.nrows())?;
    check_invertible(c0)?;
    let n = problem.dim();
    let total: f64 = problem.weights().iter().sum();
    let w: Vec<f64> = problem.weights().iter().map(|b| b / total).collect();
    let mut c = c0.clone();
    let mut ds: Vec<DMatrix<T>> = problem.matrices().iter().map(|m| linalg::congruence(&c, m.as_matrix())).collect();
    let initial_cost = cost_unchecked(&c, problem).ok_or(Error::Singular)?;
    let mut trace = Vec::new();
    let mut converged = false;
    for iter in 1..=opts.max_iter {
        let grad_norm = gradient(&c, problem)?.norm();
        let previous = c.clone();
        for i in 1..n {
            for j in 0..i {
                let (t12, t21) = pair_transform(&ds, &w, i, j);
                for d in ds.iter_mut() {
                    apply_rows(d, i, j, t12, t21);
                    apply_cols(d, i, j, t12.conjugate(), t21.conjugate());
                }
                apply_rows(&mut c, i, j, t12, t21);
            }
        }
        // Re-derive the transformed matrices from C to stop rounding drift between sweeps.
        ds = problem.matrices().iter().map(|m| linalg::congruence(&c, m.as_matrix())).collect();
        let cost = cost_unchecked(&c, problem).ok_or(Error::Singular)?;
        let stop_stat = stop_statistic(&c, &previous);
        trace.push(TraceEntry { iter, cost, grad_norm, step: 1.0, stop_stat, fallback: false });
        observer(iter, &c);
        if stop_stat <= opts.tol {
            converged = true;
            break;
        }
    }
    let iterations = trace.len();
    Ok(SolveResult { c, trace, converged, iterations, initial_cost })
}

/// Off-diagonal coefficients of the 2x2 update `[[1, t12], [t21, 1]]` acting on rows `(i, j)`.
fn pair_transform<T: Scalar>(ds: &[DMatrix<T>], w: &[f64], i: usize, j: usize) -> (T, T) {
    let (mut g12, mut g21) = (T::zero(), T::zero());
    let (mut w12, mut w21) = (0.0, 0.0);
    for (d, &wk) in ds.iter().zip(w) {
        let c1 = d[(i, i)].real();
        let c2 = d[(j, j)].real();
        let cij = d[(i, j)];
        g12 += cij * T::from_real(wk / c1);
        g21 += cij * T::from_real(wk / c2);
        w21 += wk * c1 / c2;
        w12 += wk * c2 / c1;
    }
    let omega = (w12 * w21).sqrt().max(1e-300);
    let tmp = (w21 / w12).sqrt();
    let tmp1 = (g12 * T::from_real(tmp) + g21) * T::from_real(1.0 / (omega + 1.0));
    let tmp2 = (g12 * T::from_real(tmp) - g21) * T::from_real(1.0 / (omega - 1.0).max(1e-9));
    let h12 = tmp1 + tmp2;
    let h21 = ((tmp1 - tmp2) * T::from_real(1.0 / tmp)).conjugate();
    let prod = h12 * h21;
    let base = T::one() + T::from_parts(0.0, 0.5 * prod.imaginary());
    let denom = (base + (base * base - prod).sqrt()).real();
    (-h12 * T::from_real(1.0 / denom), -h21 * T::from_real(1.0 / denom))
}

fn apply_rows<T: Scalar>(m: &mut DMatrix<T>, i: usize, j: usize, t12: T, t21: T) {
    for col in 0..m.ncols() {
        let (a, b) = (m[(i, col)], m[(j, col)]);
        m[(i, col)] = a + t12 * b;
        m[(j, col)] = t21 * a + b;
    }
}

fn apply_cols<T: Scalar>(m: &mut DMatrix<T>, i: usize, j: usize, t12: T, t21: T) {
    for row in 0..m.nrows() {
        let (a, b) = (m[(row, i)], m[(row, j)]);
        m[(row, i)] = a + t12 * b;
        m[(row, j)] = t21 * a + b;
    }
}
