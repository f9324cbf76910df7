//! Diagonality measures: how far an HPD matrix is from its own diagonal.
//!
//! Every measure except `Frobenius` is evaluated on the correlation form `A_hat`, so it is
//! invariant under positive diagonal scaling. Closed forms for 2x2 and 3x3 correlation matrices
//! and a truncated trace series for the n x n case are provided alongside the direct evaluation.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hpd::{correlation_scale, HpdMatrix, ALPHA_ENDPOINT_BAND};
use crate::linalg;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DiagonalityKind {
    /// `1/2 ||A - Diag A||_F^2`, not scale invariant.
    Frobenius,
    /// `1/2 ||A_hat - I||_F^2`.
    ModifiedFrobenius,
    /// `1/2 ||log A_hat||_F^2`.
    Riemannian,
    /// `tr A_hat^{-1} - n + log det A_hat`.
    KLRight,
    /// `-log det A_hat`.
    KLLeft,
    /// `1/2 (tr A_hat^{-1} - n)`.
    KLSymmetric,
    /// `4/(1-a^2) log det((1-a)/2 A_hat + (1+a)/2 I) / det(A_hat)^{(1-a)/2}` for `a` in `(-1, 1)`.
    LogDetAlpha(f64),
    /// `LogDetAlpha(0)`.
    Bhattacharyya,
}

impl DiagonalityKind {
    pub fn log_det_alpha(alpha: f64) -> Result<Self> {
        let k = DiagonalityKind::LogDetAlpha(alpha);
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if let DiagonalityKind::LogDetAlpha(alpha) = *self {
            if !(alpha > -1.0 && alpha < 1.0) {
                return Err(Error::domain(format!("LogDetAlpha needs alpha in (-1, 1), got {alpha}")));
            }
        }
        Ok(())
    }

    /// Kinds that depend on `A` only through `A_hat`.
    pub fn is_scale_invariant(&self) -> bool {
        !matches!(self, DiagonalityKind::Frobenius)
    }

    /// The seven scale-invariant kinds, with the given alpha for `LogDetAlpha`.
    pub fn invariant_kinds(alpha: f64) -> [DiagonalityKind; 7] {
        use DiagonalityKind::*;
        [ModifiedFrobenius, Riemannian, KLRight, KLLeft, KLSymmetric, LogDetAlpha(alpha), Bhattacharyya]
    }

    /// Resolves `Bhattacharyya` and near-endpoint `LogDetAlpha` to the kind that is evaluated.
    fn resolved(self) -> DiagonalityKind {
        match self {
            DiagonalityKind::Bhattacharyya => DiagonalityKind::LogDetAlpha(0.0),
            DiagonalityKind::LogDetAlpha(a) if a <= -1.0 + ALPHA_ENDPOINT_BAND => DiagonalityKind::KLRight,
            DiagonalityKind::LogDetAlpha(a) if a >= 1.0 - ALPHA_ENDPOINT_BAND => DiagonalityKind::KLLeft,
            k => k,
        }
    }

    fn require_invariant(&self, what: &str) -> Result<()> {
        if self.is_scale_invariant() {
            Ok(())
        } else {
            Err(Error::domain(format!("{what} is not defined for the plain Frobenius measure")))
        }
    }
}

fn ab(alpha: f64) -> (f64, f64) {
    ((1.0 - alpha) / 2.0, (1.0 + alpha) / 2.0)
}

/// Direct evaluation of a diagonality measure.
pub fn diagonality<T: Scalar>(a: &HpdMatrix<T>, kind: DiagonalityKind) -> Result<f64> {
    kind.validate()?;
    let n = a.dim();
    if let DiagonalityKind::Frobenius = kind {
        let m = a.as_matrix();
        let off: f64 = (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).filter(|(i, j)| i != j).map(|ij| m[ij].modulus_squared()).sum();
        return Ok(0.5 * off);
    }
    let cf = correlation_scale(a);
    let ah = cf.a_hat.as_matrix();
    let nf = n as f64;
    let value = match kind.resolved() {
        DiagonalityKind::ModifiedFrobenius => 0.5 * linalg::frobenius_sq(&cf.a_tilde()),
        DiagonalityKind::Riemannian => 0.5 * linalg::eigvalsh(ah).iter().map(|l| l.ln().powi(2)).sum::<f64>(),
        DiagonalityKind::KLRight => {
            let (tr_inv, ld) = trace_inverse_logdet(ah)?;
            tr_inv - nf + ld
        }
        DiagonalityKind::KLLeft => 0.0 - linalg::logdet_hpd(ah).ok_or(Error::Singular)?,
        DiagonalityKind::KLSymmetric => 0.5 * (trace_inverse_logdet(ah)?.0 - nf),
        DiagonalityKind::LogDetAlpha(alpha) => {
            let (ca, cb) = ab(alpha);
            let mut mix = ah * T::from_real(ca);
            for i in 0..n {
                mix[(i, i)] += T::from_real(cb);
            }
            let ld_mix = linalg::logdet_hpd(&mix).ok_or(Error::Singular)?;
            let ld = linalg::logdet_hpd(ah).ok_or(Error::Singular)?;
            4.0 / (1.0 - alpha * alpha) * (ld_mix - ca * ld)
        }
        DiagonalityKind::Frobenius | DiagonalityKind::Bhattacharyya => unreachable!(),
    };
    Ok(value)
}

/// `tr(A^{-1})` as `||L^{-1}||_F^2` from the Cholesky factor, and `log det A`.
fn trace_inverse_logdet<T: Scalar>(a: &DMatrix<T>) -> Result<(f64, f64)> {
    let chol = linalg::cholesky(a).ok_or(Error::Singular)?;
    let n = a.nrows();
    let linv = chol.l().solve_lower_triangular(&DMatrix::identity(n, n)).ok_or(Error::Singular)?;
    Ok((linalg::frobenius_sq(&linv), linalg::chol_logdet(&chol)))
}

/// Closed form for the 2x2 correlation matrix `[[1, r], [conj r, 1]]` with `r = |a_hat_12|`.
pub fn diagonality_2x2(r: f64, kind: DiagonalityKind) -> Result<f64> {
    kind.validate()?;
    kind.require_invariant("the 2x2 closed form")?;
    if !(r.is_finite() && r.abs() < 1.0) {
        return Err(Error::domain(format!("2x2 correlation modulus must satisfy |r| < 1, got {r}")));
    }
    let r2 = r * r;
    let l1 = (-r2).ln_1p();
    let value = match kind.resolved() {
        DiagonalityKind::ModifiedFrobenius => r2,
        DiagonalityKind::Riemannian => 0.5 * (r.ln_1p().powi(2) + (-r).ln_1p().powi(2)),
        DiagonalityKind::KLRight => 2.0 * r2 / (1.0 - r2) + l1,
        DiagonalityKind::KLLeft => -l1,
        DiagonalityKind::KLSymmetric => r2 / (1.0 - r2),
        DiagonalityKind::LogDetAlpha(alpha) => {
            let (ca, _) = ab(alpha);
            4.0 / (1.0 - alpha * alpha) * (-(ca * ca * r2)).ln_1p() - 2.0 / (1.0 + alpha) * l1
        }
        _ => unreachable!(),
    };
    Ok(value)
}

/// Invariants of a 3x3 correlation matrix with off-diagonal entries `a = a12`, `b = a31`, `c = a23`:
/// `rho^2 = |a|^2 + |b|^2 + |c|^2` and `delta = Re(a b c)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Invariants3x3 {
    pub rho: f64,
    pub delta: f64,
}

impl Invariants3x3 {
    pub fn from_correlation<T: Scalar>(a_hat: &DMatrix<T>) -> Result<Self> {
        if a_hat.nrows() != 3 || a_hat.ncols() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, found: a_hat.nrows() });
        }
        let (a, b, c) = (a_hat[(0, 1)], a_hat[(2, 0)], a_hat[(1, 2)]);
        let rho = (a.modulus_squared() + b.modulus_squared() + c.modulus_squared()).sqrt();
        Ok(Self { rho, delta: (a * b * c).real() })
    }

    /// Eigenvalues of the hollow part, from the trigonometric solution of `s^3 - rho^2 s - 2 delta = 0`.
    /// The arccos argument is clamped when it overshoots 1 by at most 1e-12.
    pub fn hollow_eigenvalues(&self) -> Result<[f64; 3]> {
        let (rho, delta) = (self.rho, self.delta);
        if rho < 1e-14 {
            return Ok([0.0; 3]);
        }
        let mut arg = 3.0 * 3f64.sqrt() * delta / rho.powi(3);
        if arg.abs() > 1.0 {
            if arg.abs() - 1.0 <= 1e-12 {
                arg = arg.signum();
            } else {
                return Err(Error::domain(format!("(rho, delta) = ({rho}, {delta}) is not realizable by a Hermitian matrix")));
            }
        }
        let phi = arg.acos() / 3.0;
        let k = 2.0 * rho / 3f64.sqrt();
        let third = std::f64::consts::FRAC_PI_3;
        Ok([k * phi.cos(), -k * (third + phi).cos(), -k * (third - phi).cos()])
    }
}

/// Closed form for a 3x3 correlation matrix in terms of its invariants.
pub fn diagonality_3x3(rho: f64, delta: f64, kind: DiagonalityKind) -> Result<f64> {
    kind.validate()?;
    kind.require_invariant("the 3x3 closed form")?;
    if !(rho.is_finite() && delta.is_finite() && rho >= 0.0) {
        return Err(Error::domain("invariants must be finite with rho >= 0"));
    }
    if rho < 1e-14 {
        return Ok(0.0);
    }
    let det = 1.0 - rho * rho + 2.0 * delta;
    if !(det > 0.0 && delta.abs() < 1.0) {
        return Err(Error::domain(format!("(rho, delta) = ({rho}, {delta}) violates 1 - rho^2 + 2 delta > 0, |delta| < 1")));
    }
    let s = Invariants3x3 { rho, delta }.hollow_eigenvalues()?;
    if s.iter().any(|v| 1.0 + v <= 0.0) {
        return Err(Error::domain(format!("(rho, delta) = ({rho}, {delta}) is not positive definite")));
    }
    let r2 = rho * rho;
    let ld = det.ln();
    let value = match kind.resolved() {
        DiagonalityKind::ModifiedFrobenius => r2,
        DiagonalityKind::Riemannian => 0.5 * s.iter().map(|v| v.ln_1p().powi(2)).sum::<f64>(),
        DiagonalityKind::KLRight => 2.0 * (r2 - 3.0 * delta) / det + ld,
        DiagonalityKind::KLLeft => -ld,
        DiagonalityKind::KLSymmetric => (r2 - 3.0 * delta) / det,
        DiagonalityKind::LogDetAlpha(alpha) => {
            let (ca, _) = ab(alpha);
            let mix = 1.0 - ca * ca * r2 + 2.0 * ca.powi(3) * delta;
            4.0 / (1.0 - alpha * alpha) * mix.ln() - 2.0 / (1.0 + alpha) * ld
        }
        _ => unreachable!(),
    };
    Ok(value)
}

/// Coefficient of `tr(A_tilde^k)` in the trace series, `k >= 2`.
pub fn series_coefficient(kind: DiagonalityKind, k: usize) -> Result<f64> {
    kind.validate()?;
    kind.require_invariant("the trace series")?;
    if k < 2 {
        return Ok(0.0);
    }
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let kf = k as f64;
    let c = match kind {
        DiagonalityKind::ModifiedFrobenius => {
            if k == 2 {
                0.5
            } else {
                0.0
            }
        }
        DiagonalityKind::Riemannian => sign / kf * (1..k).map(|j| 1.0 / j as f64).sum::<f64>(),
        DiagonalityKind::KLRight => sign * (kf - 1.0) / kf,
        DiagonalityKind::KLLeft => sign / kf,
        DiagonalityKind::KLSymmetric => sign / 2.0,
        DiagonalityKind::LogDetAlpha(alpha) => {
            let (ca, _) = ab(alpha);
            sign / kf * (0..=k - 2).map(|j| ca.powi(j as i32)).sum::<f64>()
        }
        DiagonalityKind::Bhattacharyya => 2.0 * sign / kf * (1.0 - 0.5f64.powi(k as i32 - 1)),
        DiagonalityKind::Frobenius => unreachable!(),
    };
    Ok(c)
}

/// `sum_{k=2}^{order} c_k tr(A_tilde^k)`; needs the spectral radius of `A_tilde` below one.
pub fn diagonality_series<T: Scalar>(a: &HpdMatrix<T>, kind: DiagonalityKind, order: usize) -> Result<f64> {
    kind.validate()?;
    kind.require_invariant("the trace series")?;
    let tilde = correlation_scale(a).a_tilde();
    let s = linalg::eigvalsh(&tilde);
    let radius = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if radius >= 1.0 {
        return Err(Error::domain(format!("series diverges: spectral radius of A_tilde is {radius}")));
    }
    let mut powers = s.clone();
    let mut total = 0.0;
    for k in 2..=order {
        powers.component_mul_assign(&s);
        total += series_coefficient(kind, k)? * powers.sum();
    }
    Ok(total)
}
