//! Tichavsky and Yeredor's uniformly weighted exhaustive diagonalization with Gauss iterations.
//!
//! Each iteration solves a linearized weighted least-squares fit of `W M_k W^H` to diagonal form,
//! then normalizes the rows of `W` against the first matrix.

use nalgebra::DMatrix;

use super::{check_invertible, cost_unchecked, gradient, stop_statistic, AjdProblem, SolveOptions, SolveResult, TraceEntry};
use crate::error::{Error, Result};
use crate::hpd::check_same_dim;
use crate::linalg;
use crate::scalar::Scalar;

pub fn uwedge<T: Scalar>(problem: &AjdProblem<T>, c0: &DMatrix<T>, opts: &SolveOptions) -> Result<SolveResult<T>> {
    uwedge_with_observer(problem, c0, opts, |_, _| {})
}

pub fn uwedge_with_observer<T: Scalar>(
    problem: &AjdProblem<T>,
    c0: &DMatrix<T>,
    opts: &SolveOptions,
    mut observer: impl FnMut(usize, &DMatrix<T>),
) -> Result<SolveResult<T>> {
    opts.validate()?;
    check_same_dim(problem.dim(), c0.nrows())?;
    check_invertible(c0)?;
    let n = problem.dim();
    let mut c = c0.clone();
    let initial_cost = cost_unchecked(&c, problem).ok_or(Error::Singular)?;
    let mut trace = Vec::new();
    let mut converged = false;
    for iter in 1..=opts.max_iter {
        let grad_norm = gradient(&c, problem)?.norm();
        let ms: Vec<DMatrix<T>> = problem.matrices().iter().map(|m| linalg::congruence(&c, m.as_matrix())).collect();
        let mut b = DMatrix::<f64>::zeros(n, n);
        let mut c1 = DMatrix::<T>::zeros(n, n);
        for (m, &wk) in ms.iter().zip(problem.weights()) {
            for j in 0..n {
                let rj = m[(j, j)].real();
                for i in 0..n {
                    let ri = m[(i, i)].real();
                    b[(i, j)] += wk * ri * rj;
                    c1[(i, j)] += m[(i, j)] * T::from_real(wk * ri);
                }
            }
        }
        let mut a0 = DMatrix::<T>::identity(n, n);
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    let d0 = b[(i, j)] * b[(j, i)] - b[(i, i)] * b[(j, j)];
                    let num = c1[(i, j)] * T::from_real(b[(i, j)]) - c1[(j, i)].conjugate() * T::from_real(b[(i, i)]);
                    a0[(i, j)] = num * T::from_real(1.0 / d0);
                }
            }
        }
        let Some(next) = a0.lu().solve(&c) else { break };
        let x1 = linalg::congruence(&next, problem.matrices()[0].as_matrix());
        let mut next = next;
        for i in 0..n {
            let s = T::from_real(1.0 / x1[(i, i)].modulus().sqrt());
            next.row_mut(i).iter_mut().for_each(|v| *v *= s);
        }
        if check_invertible(&next).is_err() {
            break;
        }
        let stop_stat = stop_statistic(&next, &c);
        c = next;
        let cost = cost_unchecked(&c, problem).ok_or(Error::Singular)?;
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
