//! Modified Newton method with a shifted Hessian and Armijo backtracking.

use nalgebra::{DMatrix, DVector};

use super::model::{quadratic_model, QuadraticModel};
use super::{check_invertible, cost_unchecked, scale_fix, stop_statistic, AjdProblem, SolveOptions, SolveResult, TraceEntry};
use crate::error::{Error, Result};
use crate::hpd::check_same_dim;
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct NewtonStep<T: Scalar> {
    pub w: DMatrix<T>,
    /// Shift added to the real system before factorization.
    pub shift: f64,
    /// The shifted system could not be factored and `w = -G`.
    pub fallback: bool,
}

/// Real symmetric system over `(Re vec Z, Im vec Z)`, or over `vec Z` for real matrices, and the
/// matching linear term.
fn real_system<T: Scalar>(model: &QuadraticModel<T>) -> (DMatrix<f64>, DVector<f64>) {
    let n2 = model.h.nrows();
    let g = model.g.as_slice();
    if !T::IS_COMPLEX {
        let b = DMatrix::from_fn(n2, n2, |i, j| model.h[(i, j)].real() + model.s[(i, j)].real());
        let rhs = DVector::from_iterator(n2, g.iter().map(|v| v.real()));
        return (symmetric(b), rhs);
    }
    let mut b = DMatrix::zeros(2 * n2, 2 * n2);
    for j in 0..n2 {
        for i in 0..n2 {
            let (h, s) = (model.h[(i, j)], model.s[(i, j)]);
            b[(i, j)] = h.real() + s.real();
            b[(i, j + n2)] = -h.imaginary() - s.imaginary();
            b[(i + n2, j)] = h.imaginary() - s.imaginary();
            b[(i + n2, j + n2)] = h.real() - s.real();
        }
    }
    let rhs = DVector::from_iterator(2 * n2, g.iter().map(|v| v.real()).chain(g.iter().map(|v| v.imaginary())));
    (symmetric(b), rhs)
}

fn symmetric(b: DMatrix<f64>) -> DMatrix<f64> {
    let bt = b.transpose();
    (b + bt) * 0.5
}

/// How the real system is made positive definite before solving. Both act on the system after
/// symmetric scaling by `|diag B|^{-1/2}`, so `B` below is the scaled matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum ShiftPolicy {
    /// Add `(factor * max(0, -lambda_min) + floor * ||B||_2) I`.
    Uniform { factor: f64 },
    /// Replace every eigenvalue by `max(|lambda|, floor * ||B||_2)`.
    #[default]
    Absolute,
}

/// Symmetric eigendecomposition, ascending eigenvalues.
fn eigen(b: &DMatrix<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let m = faer::Mat::<f64>::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)]);
    let e = m.self_adjoint_eigen(faer::Side::Lower).ok()?;
    let (s, u) = (e.S().column_vector(), e.U());
    let vals = DVector::from_fn(b.nrows(), |i, _| s[i]);
    let vecs = DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| u[(i, j)]);
    Some((vals, vecs))
}

/// Minimizer of the model after making its real form positive definite per `policy`.
pub fn newton_step<T: Scalar>(model: &QuadraticModel<T>, shift_floor: f64, policy: ShiftPolicy) -> NewtonStep<T> {
    step_over(model, shift_floor, policy, |_, _| true)
}

/// As [`newton_step`] with the diagonal of `W` held at zero.
///
/// At the identity the diagonal directions are exactly flat and are handled by rescaling, so the
/// reduced system drops them rather than letting the floor shift size the step along them.
pub fn relative_newton_step<T: Scalar>(model: &QuadraticModel<T>, shift_floor: f64, policy: ShiftPolicy) -> NewtonStep<T> {
    step_over(model, shift_floor, policy, |i, j| i != j)
}

fn step_over<T: Scalar>(model: &QuadraticModel<T>, shift_floor: f64, policy: ShiftPolicy, free: impl Fn(usize, usize) -> bool) -> NewtonStep<T> {
    let n = model.dim();
    let n2 = n * n;
    if model.g.iter().all(|v| v.modulus() == 0.0) {
        return NewtonStep { w: DMatrix::zeros(n, n), shift: 0.0, fallback: false };
    }
    let (b, rhs) = real_system(model);
    let keep: Vec<usize> = (0..b.nrows()).filter(|&idx| free((idx % n2) % n, (idx % n2) / n)).collect();
    let b = DMatrix::from_fn(keep.len(), keep.len(), |i, j| b[(keep[i], keep[j])]);
    let rhs = DVector::from_fn(keep.len(), |i, _| rhs[keep[i]]);
    let fallback = |shift| {
        let w = DMatrix::from_fn(n, n, |i, j| if free(i, j) { -model.g[(i, j)] } else { T::zero() });
        NewtonStep { w, shift, fallback: true }
    };
    // Symmetric Jacobi scaling so the floor acts per coordinate rather than against the largest curvature.
    let d = b.diagonal().map(|v| if v.abs() > 0.0 && v.is_finite() { 1.0 / v.abs().sqrt() } else { 1.0 });
    let b = DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] * d[i] * d[j]);
    let rhs = rhs.component_mul(&d);
    let Some((vals, vecs)) = eigen(&b) else { return fallback(f64::NAN) };
    let norm = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = shift_floor * norm;
    let (mapped, shift) = match policy {
        ShiftPolicy::Uniform { factor } => {
            let shift = factor * (-vals.min()).max(0.0) + floor;
            (vals.map(|v| v + shift), shift)
        }
        ShiftPolicy::Absolute => (vals.map(|v| v.abs().max(floor)), floor),
    };
    if !(shift.is_finite()) || mapped.iter().any(|v| !(*v > 0.0)) {
        return fallback(shift);
    }
    let coef = vecs.tr_mul(&rhs).component_div(&mapped);
    let x = -(&vecs * coef).component_mul(&d);
    if x.iter().any(|v| !v.is_finite()) {
        return fallback(shift);
    }
    let mut full = DVector::zeros(2 * n2);
    for (v, &idx) in x.iter().zip(&keep) {
        full[idx] = *v;
    }
    let w = DMatrix::from_fn(n, n, |i, j| {
        let idx = i + n * j;
        let im = if T::IS_COMPLEX { full[idx + n2] } else { 0.0 };
        T::from_parts(full[idx], im)
    });
    NewtonStep { w, shift, fallback: false }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearch {
    /// Accepted step, zero when backtracking was exhausted.
    pub step: f64,
    pub accepted: bool,
    pub backtracks: usize,
    /// Cost at `c + step w`; the starting cost if nothing was accepted.
    pub cost: f64,
    /// `|cost(c + mu w) - cost(c)|` at the last step tried. After an exhausted search this is
    /// the rounding noise of the cost near `c`.
    pub resolution: f64,
    /// `Re tr(W^H G)`.
    pub slope: f64,
}

/// Largest `mu` in `{1, beta, beta^2, ...}` satisfying the Armijo condition with `c + mu w`
/// invertible and every `Q_alpha` positive definite.
pub fn armijo_search<T: Scalar>(
    c: &DMatrix<T>,
    w: &DMatrix<T>,
    g: &DMatrix<T>,
    cost0: f64,
    problem: &AjdProblem<T>,
    opts: &SolveOptions,
) -> LineSearch {
    let slope: f64 = w.iter().zip(g.iter()).map(|(a, b)| (a.conjugate() * *b).real()).sum();
    let mut mu = 1.0;
    let mut resolution = f64::INFINITY;
    for backtracks in 0..=opts.armijo_max_backtracks {
        let trial = c + w * T::from_real(mu);
        resolution = f64::INFINITY;
        if check_invertible(&trial).is_ok() {
            if let Some(f) = cost_unchecked(&trial, problem) {
                if f <= cost0 + opts.armijo_sigma * mu * slope {
                    return LineSearch { step: mu, accepted: true, backtracks, cost: f, resolution: (f - cost0).abs(), slope };
                }
                resolution = (f - cost0).abs();
            }
        }
        mu *= opts.armijo_beta;
    }
    LineSearch { step: 0.0, accepted: false, backtracks: opts.armijo_max_backtracks, cost: cost0, resolution, slope }
}

fn offdiag<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let mut out = m.clone();
    out.fill_diagonal(T::zero());
    out
}

pub fn solve<T: Scalar>(problem: &AjdProblem<T>, c0: &DMatrix<T>, opts: &SolveOptions) -> Result<SolveResult<T>> {
    solve_with_observer(problem, c0, opts, |_, _| {})
}

/// As [`solve`], calling `observer(iteration, c)` after every iteration.
pub fn solve_with_observer<T: Scalar>(
    problem: &AjdProblem<T>,
    c0: &DMatrix<T>,
    opts: &SolveOptions,
    mut observer: impl FnMut(usize, &DMatrix<T>),
) -> Result<SolveResult<T>> {
    opts.validate()?;
    check_same_dim(problem.dim(), c0.nrows())?;
    check_invertible(c0)?;
    let n = c0.nrows();
    let mut c = c0.clone();
    let initial_cost = cost_unchecked(&c, problem).ok_or(Error::Singular)?;
    let mut f = initial_cost;
    let mut trace = Vec::new();
    let mut converged = false;
    for iter in 1..=opts.max_iter {
        // Model in relative coordinates `Z = E C`, i.e. at the identity for `{C M_k C^H}`.
        let model = quadratic_model(&DMatrix::identity(n, n), &problem.transformed(&c))?;
        let cinv_h = c.clone().try_inverse().ok_or(Error::Singular)?.adjoint();
        let g = &model.g * &cinv_h;
        let grad_norm = g.norm();
        let relative = relative_newton_step(&model, opts.hessian_shift_floor, opts.shift_policy);
        let mut step = NewtonStep { w: &relative.w * &c, ..relative };
        if model.slope(&relative.w) >= 0.0 {
            step = NewtonStep { w: -offdiag(&model.g) * &c, shift: step.shift, fallback: true };
        }
        let mut ls = armijo_search(&c, &step.w, &g, f, problem, opts);
        if !ls.accepted {
            // Either the correction already meets the stopping rule, or its predicted decrease is
            // below the noise of the cost itself; no line search can make progress from here.
            let proposed = stop_statistic(&(&c + &step.w), &c);
            if proposed <= opts.tol || -ls.slope <= ls.resolution {
                trace.push(TraceEntry { iter, cost: f, grad_norm, step: 0.0, stop_stat: proposed, fallback: step.fallback });
                observer(iter, &c);
                converged = true;
                break;
            }
            if !step.fallback {
                step = NewtonStep { w: -offdiag(&model.g) * &c, shift: step.shift, fallback: true };
                ls = armijo_search(&c, &step.w, &g, f, problem, opts);
            }
            if !ls.accepted {
                trace.push(TraceEntry { iter, cost: f, grad_norm, step: 0.0, stop_stat: f64::INFINITY, fallback: step.fallback });
                observer(iter, &c);
                break;
            }
        }
        let moved = &c + &step.w * T::from_real(ls.step);
        let scaled = scale_fix(&moved, problem.mean());
        // Rescaling leaves the cost unchanged in exact arithmetic; keep it only if rounding agrees.
        let (next, next_cost) = match cost_unchecked(&scaled, problem) {
            Some(fs) if fs <= ls.cost && check_invertible(&scaled).is_ok() => (scaled, fs),
            _ => (moved, ls.cost),
        };
        let stop_stat = stop_statistic(&next, &c);
        c = next;
        f = next_cost;
        trace.push(TraceEntry { iter, cost: f, grad_norm, step: ls.step, stop_stat, fallback: step.fallback });
        observer(iter, &c);
        if stop_stat <= opts.tol {
            converged = true;
            break;
        }
    }
    let iterations = trace.len();
    Ok(SolveResult { c, trace, converged, iterations, initial_cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::amari_moreau;
    use crate::hpd::HpdMatrix;
    use crate::linalg;
    use crate::random;
    use crate::scalar::C64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// `M_k = A D_k A^H`; the returned `A` is undone by an exact diagonalizer up to scale and order.
    fn mixture<T: Scalar>(seed: u64, n: usize, k: usize, alpha: f64) -> (AjdProblem<T>, DMatrix<T>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random::near_identity::<T, _>(&mut rng, n, 0.5);
        let ms = (0..k)
            .map(|_| {
                let d = random::positive_diagonal(&mut rng, n, 0.1, 3.0);
                let mut m = linalg::congruence(&a, &linalg::from_diag::<T>(&d));
                linalg::mirror_lower(&mut m);
                HpdMatrix::from_matrix(m).unwrap()
            })
            .collect();
        (AjdProblem::new(ms, alpha).unwrap(), a)
    }

    fn pd_model<T: Scalar>(seed: u64, n: usize) -> QuadraticModel<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n2 = n * n;
        let h = random::hpd::<T, _>(&mut rng, n2, 1.0).into_matrix();
        let r = random::gaussian::<T, _>(&mut rng, n2, n2) * T::from_real(0.05);
        let s = &r + r.transpose();
        let g = random::gaussian::<T, _>(&mut rng, n, n);
        QuadraticModel { g, h, s }
    }

    /// Stationarity of the model: `g + H z + conj(S) conj(z) = 0`.
    fn model_residual<T: Scalar>(m: &QuadraticModel<T>, w: &DMatrix<T>) -> DMatrix<T> {
        let z = crate::kron::vec(w);
        let r = crate::kron::vec(&m.g) + &m.h * &z + m.s.map(|v| v.conjugate()) * z.map(|v| v.conjugate());
        crate::kron::unvec(&r, w.nrows(), w.ncols()).unwrap()
    }

    #[test]
    fn zero_gradient_gives_zero_step() {
        let mut m = pd_model::<f64>(1, 3);
        m.g.fill(0.0);
        let step = newton_step(&m, 1e-8, ShiftPolicy::Absolute);
        assert!(step.w.iter().all(|v| *v == 0.0) && !step.fallback);
    }

    #[test]
    fn positive_definite_model_is_minimized_exactly() {
        for policy in [ShiftPolicy::Absolute, ShiftPolicy::Uniform { factor: 1.0 }] {
            let m = pd_model::<f64>(2, 3);
            let step = newton_step(&m, 1e-15, policy);
            assert!(model_residual(&m, &step.w).norm() < 1e-10 * m.g.norm(), "{policy:?}");
            let m = pd_model::<C64>(3, 3);
            let step = newton_step(&m, 1e-15, policy);
            assert!(model_residual(&m, &step.w).norm() < 1e-10 * m.g.norm(), "complex {policy:?}");
        }
    }

    #[test]
    fn relative_step_solves_the_off_diagonal_block() {
        let m = pd_model::<C64>(4, 3);
        let step = relative_newton_step(&m, 1e-15, ShiftPolicy::Absolute);
        let r = model_residual(&m, &step.w);
        for i in 0..3 {
            assert_eq!(step.w[(i, i)], C64::new(0.0, 0.0));
            for j in 0..3 {
                if i != j {
                    assert!(r[(i, j)].norm() < 1e-10 * m.g.norm());
                }
            }
        }
    }

    #[test]
    fn shifted_steps_descend_on_indefinite_models() {
        let mut m = pd_model::<f64>(5, 3);
        m.h -= DMatrix::identity(9, 9) * 3.0;
        for policy in [ShiftPolicy::Absolute, ShiftPolicy::Uniform { factor: 1.0 }, ShiftPolicy::Uniform { factor: 2.0 }] {
            let step = newton_step(&m, 1e-8, policy);
            assert!(!step.fallback && m.slope(&step.w) < 0.0, "{policy:?}");
        }
    }

    #[test]
    fn singular_trial_forces_backtracking() {
        let (p, _) = mixture::<f64>(6, 3, 4, 0.0);
        let c = DMatrix::identity(3, 3);
        let g = super::super::gradient(&c, &p).unwrap();
        let f0 = cost_unchecked(&c, &p).unwrap();
        let ls = armijo_search(&c, &(-&c), &g, f0, &p, &SolveOptions::default());
        assert!(ls.step < 1.0);
        if ls.accepted {
            assert!(ls.cost < f0);
        }
    }

    #[test]
    fn full_step_is_accepted_near_a_solution() {
        let (p, a) = mixture::<f64>(7, 4, 5, 0.3);
        let c_exact = a.clone().try_inverse().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = &c_exact + random::gaussian::<f64, _>(&mut rng, 4, 4) * 1e-4;
        let f0 = cost_unchecked(&c, &p).unwrap();
        let model = quadratic_model(&c, &p).unwrap();
        let rel_model = quadratic_model(&DMatrix::identity(4, 4), &p.transformed(&c)).unwrap();
        let rel = relative_newton_step(&rel_model, 1e-8, ShiftPolicy::Absolute);
        let ls = armijo_search(&c, &(&rel.w * &c), &model.g, f0, &p, &SolveOptions::default());
        assert!(ls.accepted && ls.step == 1.0, "{ls:?}");
        assert!(ls.cost < 1e-6 * f0);
    }

    #[test]
    fn two_matrices_are_diagonalized_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for alpha in [-0.5, 0.0, 1.0] {
            let ms = vec![random::hpd::<f64, _>(&mut rng, 4, 0.3), random::hpd::<f64, _>(&mut rng, 4, 0.3)];
            let p = AjdProblem::new(ms, alpha).unwrap();
            let r = solve(&p, &DMatrix::identity(4, 4), &SolveOptions::default()).unwrap();
            assert!(r.converged && r.final_cost() < 1e-10, "alpha {alpha}: {}", r.final_cost());
        }
    }

    fn recovers<T: Scalar>(seed: u64, alpha: f64) {
        let (p, a) = mixture::<T>(seed, 5, 8, alpha);
        let r = solve(&p, &DMatrix::identity(5, 5), &SolveOptions::default()).unwrap();
        assert!(r.converged, "alpha {alpha}");
        assert!(r.final_cost() < 1e-12, "alpha {alpha}: cost {}", r.final_cost());
        assert!(amari_moreau(&(&r.c * &a)).unwrap() < 1e-6);
        for w in r.trace.windows(2) {
            assert!(w[1].cost <= w[0].cost);
        }
        assert!(r.trace[0].cost <= r.initial_cost);
    }

    #[test]
    fn noiseless_mixtures_are_recovered() {
        for (i, alpha) in [-1.0, -0.75, 0.0, 0.75, 1.0].into_iter().enumerate() {
            recovers::<f64>(10 + i as u64, alpha);
            recovers::<C64>(20 + i as u64, alpha);
        }
    }

    #[test]
    fn invalid_start_is_rejected() {
        let (p, _) = mixture::<f64>(11, 3, 3, 0.0);
        assert!(solve(&p, &DMatrix::zeros(3, 3), &SolveOptions::default()).is_err());
        assert!(solve(&p, &DMatrix::identity(4, 4), &SolveOptions::default()).is_err());
    }
}
