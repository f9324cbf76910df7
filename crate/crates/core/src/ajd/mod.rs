//! Approximate joint diagonalization with the log-det alpha-divergence criterion.
//!
//! The cost of a candidate diagonalizer `C` is `sum_k beta_k D_alpha(C M_k C^H)` where `D_alpha`
//! is the log-det alpha diagonality measure. `solve` is a modified Newton method on that cost;
//! `jadiag` and `uwedge` are reference algorithms sharing the same result type and stopping rule.

mod jadiag;
mod model;
mod newton;
mod uwedge;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hpd::{check_same_dim, HpdMatrix, ALPHA_ENDPOINT_BAND};
use crate::linalg;
use crate::scalar::Scalar;

pub use jadiag::{jadiag, jadiag_with_observer};
pub use model::{gradient, quadratic_model, quadratic_model_with, GradientForm, QuadraticModel};
pub use newton::{armijo_search, newton_step, relative_newton_step, solve, solve_with_observer, LineSearch, NewtonStep, ShiftPolicy};
pub use uwedge::{uwedge, uwedge_with_observer};

#[derive(Clone, Debug)]
pub struct AjdProblem<T: Scalar> {
    matrices: Vec<HpdMatrix<T>>,
    weights: Vec<f64>,
    alpha: f64,
    mean: DMatrix<T>,
}

impl<T: Scalar> AjdProblem<T> {
    pub fn new(matrices: Vec<HpdMatrix<T>>, alpha: f64) -> Result<Self> {
        let k = matrices.len();
        Self::with_weights(matrices, vec![1.0; k], alpha)
    }

    pub fn with_weights(matrices: Vec<HpdMatrix<T>>, weights: Vec<f64>, alpha: f64) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::domain("at least one matrix is required"));
        }
        check_same_dim(matrices.len(), weights.len())?;
        let n = matrices[0].dim();
        for m in &matrices {
            check_same_dim(n, m.dim())?;
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::domain("weights must be positive and finite"));
        }
        crate::hpd::check_alpha_closed(alpha)?;
        let total: f64 = weights.iter().sum();
        let mut mean = DMatrix::zeros(n, n);
        for (m, w) in matrices.iter().zip(&weights) {
            mean += m.as_matrix() * T::from_real(w / total);
        }
        linalg::mirror_lower(&mut mean);
        Ok(Self { matrices, weights, alpha, mean })
    }

    /// The same problem for the transformed set `{C M_k C^H}`.
    pub(crate) fn transformed(&self, c: &DMatrix<T>) -> Self {
        let matrices = self.matrices.iter().map(|m| HpdMatrix::from_matrix_unchecked(linalg::congruence(c, m.as_matrix()))).collect();
        Self { matrices, weights: self.weights.clone(), alpha: self.alpha, mean: linalg::congruence(c, &self.mean) }
    }

    /// Reads raw matrices, checking each one for Hermitian positive definiteness.
    pub fn from_matrices(ms: Vec<DMatrix<T>>, alpha: f64) -> Result<Self> {
        let hpd = ms.into_iter().map(HpdMatrix::from_matrix).collect::<Result<Vec<_>>>()?;
        Self::new(hpd, alpha)
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].dim()
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrices(&self) -> &[HpdMatrix<T>] {
        &self.matrices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Weighted arithmetic mean of the matrices, used for scale fixing.
    pub fn mean(&self) -> &DMatrix<T> {
        &self.mean
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        crate::hpd::check_alpha_closed(alpha)?;
        Ok(Self { alpha, ..self.clone() })
    }
}

/// Which closed form the cost and its derivatives use for a given alpha.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Branch {
    /// Left KL measure, `-log det A_hat`.
    Left,
    /// Right KL measure, `tr A_hat^{-1} - n + log det A_hat`.
    Right,
    Interior(f64),
}

pub(crate) fn branch(alpha: f64) -> Branch {
    if alpha >= 1.0 - ALPHA_ENDPOINT_BAND {
        Branch::Left
    } else if alpha <= -1.0 + ALPHA_ENDPOINT_BAND {
        Branch::Right
    } else {
        Branch::Interior(alpha)
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub armijo_sigma: f64,
    pub armijo_beta: f64,
    pub armijo_max_backtracks: usize,
    pub hessian_shift_floor: f64,
    pub shift_policy: ShiftPolicy,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-15, max_iter: 200, armijo_sigma: 1e-4, armijo_beta: 0.5, armijo_max_backtracks: 30, hessian_shift_floor: 1e-8, shift_policy: ShiftPolicy::Absolute }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.tol, self.armijo_sigma, self.hessian_shift_floor];
        if pos.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.max_iter == 0 || self.armijo_max_backtracks == 0 {
            return Err(Error::domain("solver options must be positive"));
        }
        if let ShiftPolicy::Uniform { factor } = self.shift_policy {
            if !(factor >= 1.0 && factor.is_finite()) {
                return Err(Error::domain("uniform shift factor must be at least 1"));
            }
        }
        if !(self.armijo_beta > 0.0 && self.armijo_beta < 1.0) {
            return Err(Error::domain("armijo_beta must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    /// Cost of the problem at the iterate reached in this iteration.
    pub cost: f64,
    /// Frobenius norm of the gradient at the point the iteration started from.
    pub grad_norm: f64,
    pub step: f64,
    pub stop_stat: f64,
    /// The Newton system could not be used and the step followed `-G`.
    pub fallback: bool,
}

#[derive(Clone, Debug)]
pub struct SolveResult<T: Scalar> {
    pub c: DMatrix<T>,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub iterations: usize,
    pub initial_cost: f64,
}

impl<T: Scalar> SolveResult<T> {
    pub fn final_cost(&self) -> f64 {
        self.trace.last().map_or(self.initial_cost, |e| e.cost)
    }

    /// Trace as CSV with header `iter,cost,grad_norm,step,stop_stat`, 17 significant digits.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,cost,grad_norm,step,stop_stat\n");
        for e in &self.trace {
            out.push_str(&format!("{},{:.16e},{:.16e},{:.16e},{:.16e}\n", e.iter, e.cost, e.grad_norm, e.step, e.stop_stat));
        }
        out
    }
}

/// `(1-alpha)/2 C M C^H + (1+alpha)/2 Diag(C M C^H)`.
pub fn q_alpha<T: Scalar>(c: &DMatrix<T>, m: &HpdMatrix<T>, alpha: f64) -> Result<HpdMatrix<T>> {
    check_invertible(c)?;
    crate::hpd::check_alpha_closed(alpha)?;
    let x = linalg::congruence(c, m.as_matrix());
    let mut q = &x * T::from_real((1.0 - alpha) / 2.0);
    for i in 0..x.nrows() {
        q[(i, i)] = x[(i, i)];
    }
    HpdMatrix::from_matrix(q)
}

pub(crate) fn check_invertible<T: Scalar>(c: &DMatrix<T>) -> Result<()> {
    crate::hpd::check_square(c)?;
    let scale = linalg::max_abs(c);
    let lu = c.clone().lu();
    let u = lu.u();
    let min_piv = (0..c.nrows()).map(|i| u[(i, i)].modulus()).fold(f64::INFINITY, f64::min);
    if !(scale > 0.0 && min_piv.is_finite() && min_piv > scale * f64::EPSILON * c.nrows() as f64) {
        return Err(Error::Singular);
    }
    Ok(())
}

/// Diagonality measure of `x = C M C^H` on the given branch; `None` if `x` is not numerically HPD.
pub(crate) fn measure_of<T: Scalar>(x: &DMatrix<T>, br: Branch) -> Option<f64> {
    let n = x.nrows();
    let chol = linalg::cholesky(x)?;
    let ld_x = linalg::chol_logdet(&chol);
    let d = linalg::diag_real(x);
    if d.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let ld_d: f64 = d.iter().map(|v| v.ln()).sum();
    let value = match br {
        Branch::Left => ld_d - ld_x,
        Branch::Right => {
            let tr = linalg::trace_real(&chol.solve(&linalg::from_diag::<T>(&d)));
            tr - n as f64 + ld_x - ld_d
        }
        Branch::Interior(alpha) => {
            let (ca, cb) = ((1.0 - alpha) / 2.0, (1.0 + alpha) / 2.0);
            let mut q = x * T::from_real(ca);
            for i in 0..n {
                q[(i, i)] += T::from_real(cb * d[i]);
            }
            let ld_q = linalg::logdet_hpd(&q)?;
            4.0 / (1.0 - alpha * alpha) * (ld_q - ca * ld_x - cb * ld_d)
        }
    };
    value.is_finite().then_some(value)
}

/// `sum_k beta_k D_alpha(C M_k C^H)`, summed in matrix order.
pub fn cost<T: Scalar>(c: &DMatrix<T>, problem: &AjdProblem<T>) -> Result<f64> {
    check_same_dim(problem.dim(), c.nrows())?;
    check_invertible(c)?;
    cost_unchecked(c, problem).ok_or(Error::Singular)
}

pub(crate) fn cost_unchecked<T: Scalar>(c: &DMatrix<T>, problem: &AjdProblem<T>) -> Option<f64> {
    let br = branch(problem.alpha);
    let mut total = 0.0;
    for (m, w) in problem.matrices.iter().zip(&problem.weights) {
        let x = linalg::congruence(c, m.as_matrix());
        total += w * measure_of(&x, br)?;
    }
    Some(total)
}

/// `(1/n) ||C_new^{-1} C_old - I||_F^2`.
pub fn stop_statistic<T: Scalar>(c_new: &DMatrix<T>, c_old: &DMatrix<T>) -> f64 {
    let n = c_new.nrows();
    match c_new.clone().lu().solve(c_old) {
        Some(mut x) => {
            for i in 0..n {
                x[(i, i)] -= T::one();
            }
            linalg::frobenius_sq(&x) / n as f64
        }
        None => f64::INFINITY,
    }
}

/// Scales rows of `c` so that `Diag(C Mbar C^H) = I`.
pub(crate) fn scale_fix<T: Scalar>(c: &DMatrix<T>, mean: &DMatrix<T>) -> DMatrix<T> {
    let x = c * mean * c.adjoint();
    let mut out = c.clone();
    for i in 0..c.nrows() {
        let d = x[(i, i)].real();
        if d > 0.0 && d.is_finite() {
            let s = T::from_real(1.0 / d.sqrt());
            out.row_mut(i).iter_mut().for_each(|v| *v *= s);
        }
    }
    out
}

/// The three joint diagonalizers behind a common interface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    LdNewton,
    Jadiag,
    Uwedge,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::LdNewton, Algorithm::Jadiag, Algorithm::Uwedge];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::LdNewton => "ldnewton",
            Algorithm::Jadiag => "jadiag",
            Algorithm::Uwedge => "uwedge",
        }
    }

    /// Only the Newton method depends on alpha; the others minimize their own criteria.
    pub fn uses_alpha(self) -> bool {
        matches!(self, Algorithm::LdNewton)
    }

    pub fn run<T: Scalar>(
        self,
        problem: &AjdProblem<T>,
        c0: &DMatrix<T>,
        opts: &SolveOptions,
        observer: impl FnMut(usize, &DMatrix<T>),
    ) -> Result<SolveResult<T>> {
        match self {
            Algorithm::LdNewton => solve_with_observer(problem, c0, opts, observer),
            Algorithm::Jadiag => jadiag_with_observer(problem, c0, opts, observer),
            Algorithm::Uwedge => uwedge_with_observer(problem, c0, opts, observer),
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown algorithm `{s}` (expected ldnewton, jadiag or uwedge)")))
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpd::{correlation_scale, logdet_alpha_divergence};
    use crate::random;
    use crate::scalar::C64;
    use rand::SeedableRng;
    use nalgebra::DVector;
    use rand_chacha::ChaCha8Rng;

    fn problem<T: Scalar>(seed: u64, n: usize, k: usize, alpha: f64) -> (AjdProblem<T>, DMatrix<T>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ms = (0..k).map(|_| random::hpd::<T, _>(&mut rng, n, 0.2)).collect();
        let c = random::near_identity::<T, _>(&mut rng, n, 0.4);
        (AjdProblem::new(ms, alpha).unwrap(), c)
    }

    fn example() -> HpdMatrix<f64> {
        HpdMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])).unwrap()
    }

    #[test]
    fn q_alpha_endpoints_and_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random::hpd::<C64, _>(&mut rng, 3, 0.3);
        let c = random::near_identity::<C64, _>(&mut rng, 3, 0.3);
        let x = linalg::congruence(&c, m.as_matrix());
        let left = q_alpha(&c, &m, -1.0).unwrap();
        assert!((left.as_matrix() - &x).norm() < 1e-12 * x.norm());
        let right = q_alpha(&c, &m, 1.0).unwrap();
        let d = linalg::from_diag::<C64>(&linalg::diag_real(&x));
        assert!((right.as_matrix() - d).norm() < 1e-12 * x.norm());
        let mid = q_alpha(&DMatrix::identity(2, 2), &example(), 0.0).unwrap();
        assert_eq!(mid.as_matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.25, 0.25, 1.0]));
        assert!(q_alpha(&DMatrix::zeros(2, 2), &example(), 0.0).is_err());
    }

    #[test]
    fn single_matrix_left_kl_cost() {
        let p = AjdProblem::new(vec![example()], 1.0).unwrap();
        let f = cost(&DMatrix::identity(2, 2), &p).unwrap();
        assert!((f - 0.2876821).abs() < 1e-7);
        assert!((f + 0.75f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn cost_ignores_row_scaling_and_order() {
        for alpha in [-1.0, -0.4, 0.0, 0.6, 1.0] {
            let (p, c) = problem::<C64>(2, 4, 3, alpha);
            let perm = DMatrix::from_fn(4, 4, |i, j| if j == (i + 1) % 4 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
            let d = linalg::from_diag::<C64>(&DVector::from_vec(vec![0.3, -2.0, 5.0, 1e-2]));
            let f = cost(&c, &p).unwrap();
            let g = cost(&(perm * d * &c), &p).unwrap();
            assert!((f - g).abs() < 1e-10 * f.abs().max(1.0), "alpha {alpha}");
        }
    }

    #[test]
    fn symmetric_at_alpha_zero() {
        let (p, c) = problem::<f64>(3, 4, 3, 0.0);
        let mut via_swapped = 0.0;
        for m in p.matrices() {
            let x = HpdMatrix::from_matrix(linalg::congruence(&c, m.as_matrix())).unwrap();
            let d = x.diag().to_hpd::<f64>();
            let a = logdet_alpha_divergence(&x, &d, 0.0).unwrap();
            let b = logdet_alpha_divergence(&d, &x, 0.0).unwrap();
            assert!((a - b).abs() < 1e-12);
            via_swapped += b;
        }
        assert!((cost(&c, &p).unwrap() - via_swapped).abs() < 1e-12);
    }

    #[test]
    fn right_endpoint_is_right_kl_of_correlation_form() {
        let (p, c) = problem::<C64>(4, 3, 4, -1.0);
        let expected: f64 = p
            .matrices()
            .iter()
            .map(|m| {
                let x = HpdMatrix::from_matrix(linalg::congruence(&c, m.as_matrix())).unwrap();
                let a = correlation_scale(&x).a_hat;
                linalg::trace_real(a.inverse().as_matrix()) - 3.0 + a.logdet()
            })
            .sum();
        assert!((cost(&c, &p).unwrap() - expected).abs() < 1e-12 * expected);
        let kind = crate::measures::DiagonalityKind::KLRight;
        let via_measures: f64 = p
            .matrices()
            .iter()
            .map(|m| crate::measures::diagonality(&HpdMatrix::from_matrix(linalg::congruence(&c, m.as_matrix())).unwrap(), kind).unwrap())
            .sum();
        assert!((via_measures - expected).abs() < 1e-12 * expected);
    }

    fn directional_checks<T: Scalar>(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for alpha in [-1.0, -0.75, 0.0, 0.3, 1.0] {
            let (p, c) = problem::<T>(seed, 4, 3, alpha);
            let delta = linalg::from_diag::<T>(&DVector::from_fn(4, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0)));
            let dc = &delta * &c;
            let model = quadratic_model(&c, &p).unwrap();
            let scale = model.g.norm() * dc.norm();
            assert!(model.slope(&dc).abs() < 1e-10 * scale.max(1.0), "alpha {alpha}");
            let curv_scale = model.h.norm() * dc.norm_squared();
            assert!(model.curvature(&dc).abs() < 1e-8 * curv_scale.max(1.0), "alpha {alpha}");
            let f0 = cost(&c, &p).unwrap();
            for t in [-0.1, -0.05, 0.05, 0.1] {
                let f = cost(&(&c + &dc * T::from_real(t)), &p).unwrap();
                assert!((f - f0).abs() < 1e-12 * f0.max(1.0), "alpha {alpha} t {t}");
            }
        }
    }

    #[test]
    fn diagonal_scaling_directions_are_flat() {
        directional_checks::<f64>(5);
        directional_checks::<C64>(6);
    }

    #[test]
    fn gradient_vanishes_at_exact_diagonalizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random::near_identity::<C64, _>(&mut rng, 3, 0.5);
        let ms = (0..4)
            .map(|_| {
                let d = random::positive_diagonal(&mut rng, 3, 0.2, 2.0);
                let mut m = linalg::congruence(&a, &linalg::from_diag::<C64>(&d));
                linalg::mirror_lower(&mut m);
                HpdMatrix::from_matrix(m).unwrap()
            })
            .collect::<Vec<_>>();
        let c = a.try_inverse().unwrap();
        for alpha in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let p = AjdProblem::new(ms.clone(), alpha).unwrap();
            assert!(cost(&c, &p).unwrap().abs() < 1e-12);
            assert!(gradient(&c, &p).unwrap().norm() < 1e-10, "alpha {alpha}");
        }
    }

    #[test]
    fn near_endpoint_alpha_uses_kl_model() {
        for alpha in [1.0 - 1e-8, -1.0 + 1e-8] {
            let (p, c) = problem::<f64>(8, 3, 3, alpha);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let z = random::gaussian::<f64, _>(&mut rng, 3, 3);
            let exact = p.with_alpha(alpha.signum()).unwrap();
            let f = |t: f64| cost(&(&c + &z * t), &exact).unwrap();
            let model = quadratic_model(&c, &p).unwrap();
            let t = 1e-5;
            let fd = (f(t) - f(-t)) / (2.0 * t);
            assert!((fd - model.slope(&z)).abs() < 1e-6 * fd.abs());
            let t = 1e-4;
            let fd2 = (f(t) - 2.0 * f(0.0) + f(-t)) / (t * t);
            assert!((fd2 - model.curvature(&z)).abs() < 1e-4 * fd2.abs());
        }
    }

    #[test]
    fn log_det_expansion_has_third_order_remainder() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random::gaussian::<f64, _>(&mut rng, 4, 4);
        let b = random::gaussian::<f64, _>(&mut rng, 4, 4);
        let remainder = |t: f64| {
            let m = DMatrix::identity(4, 4) + &a * t + &b * (t * t);
            let ld = m.determinant().ln();
            let tra = a.trace();
            ld - t * tra - t * t * (b.trace() - 0.5 * (&a * &a).trace())
        };
        let ts: Vec<f64> = (0..9).map(|i| 10f64.powf(-4.0 + 0.25 * i as f64)).collect();
        let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = ts.iter().map(|t| remainder(*t).abs().ln()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / 9.0, ys.iter().sum::<f64>() / 9.0);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope - 3.0).abs() < 0.1, "{slope}");
    }

    #[test]
    fn stop_statistic_and_scale_fix() {
        let (p, c) = problem::<C64>(11, 3, 3, 0.0);
        assert!(stop_statistic(&c, &c) < 1e-28);
        let doubled = &c * C64::new(2.0, 0.0);
        assert!((stop_statistic(&doubled, &c) - 0.25).abs() < 1e-14);
        let fixed = scale_fix(&c, p.mean());
        let d = linalg::diag_real(&linalg::congruence(&fixed, p.mean()));
        assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!((cost(&fixed, &p).unwrap() - cost(&c, &p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn problem_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m2 = random::hpd::<f64, _>(&mut rng, 2, 0.1);
        let m3 = random::hpd::<f64, _>(&mut rng, 3, 0.1);
        assert!(AjdProblem::<f64>::new(vec![], 0.0).is_err());
        assert!(AjdProblem::new(vec![m2.clone(), m3], 0.0).is_err());
        assert!(AjdProblem::new(vec![m2.clone()], 1.5).is_err());
        assert!(AjdProblem::with_weights(vec![m2.clone()], vec![0.0], 0.0).is_err());
        assert!(AjdProblem::with_weights(vec![m2.clone(), m2], vec![1.0], 0.0).is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for alg in Algorithm::ALL {
            assert_eq!(alg.name().parse::<Algorithm>().unwrap(), alg);
        }
        assert!("jade".parse::<Algorithm>().is_err());
    }
}
