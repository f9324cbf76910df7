//! Gradient and second-order model of the AJD cost.
//!
//! For a direction `Z` the cost satisfies
//! `J(C + tZ) = J(C) + t Re tr(Z^H G) + t^2/2 (z^H H z + Re z^T S z) + O(t^3)`, `z = vec(Z)`.
//! The alpha cost is a combination of three log-det terms
//! `4/(1-a^2) f_{a,b} - 2/(1+a) f_{1,0} - 2/(1-a) f_{0,1}` with
//! `f_{a,b}(C) = log det(a X + b Diag X)`, `X = C M C^H`; the endpoints use exact KL forms.
//! `H` and `S` are assembled entrywise in `O(n^4)` per matrix. Row `(p, r)` of `H` refers to
//! `Z_{pr}` and column `(s, q)` to `Z_{sq}`, both at column-major offsets.

use nalgebra::DMatrix;

use super::{branch, check_invertible, AjdProblem, Branch};
use crate::error::{Error, Result};
use crate::hpd::check_same_dim;
use crate::kron;
use crate::linalg;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticModel<T: Scalar> {
    pub g: DMatrix<T>,
    pub h: DMatrix<T>,
    pub s: DMatrix<T>,
}

impl<T: Scalar> QuadraticModel<T> {
    pub fn zeros(n: usize) -> Self {
        Self { g: DMatrix::zeros(n, n), h: DMatrix::zeros(n * n, n * n), s: DMatrix::zeros(n * n, n * n) }
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// `Re tr(Z^H G)`.
    pub fn slope(&self, z: &DMatrix<T>) -> f64 {
        z.iter().zip(self.g.iter()).map(|(a, b)| (a.conjugate() * *b).real()).sum()
    }

    /// `z^H H z + Re z^T S z`.
    pub fn curvature(&self, z: &DMatrix<T>) -> f64 {
        let v = kron::vec(z);
        let hv = &self.h * &v;
        let sv = &self.s * &v;
        let a: T = v.adjoint().iter().zip(hv.iter()).map(|(x, y)| *x * *y).fold(T::zero(), |s, t| s + t);
        let b: T = v.iter().zip(sv.iter()).map(|(x, y)| *x * *y).fold(T::zero(), |s, t| s + t);
        a.real() + b.real()
    }

    fn symmetrize(&mut self) {
        self.h = linalg::hermitian_part(&self.h);
        let st = self.s.transpose();
        self.s = (&self.s + st) * T::from_real(0.5);
    }
}

/// Which diagonal bracket the interior gradient uses.
///
/// `Derived` differentiates the three-term combination directly. `AsPrinted` replaces
/// `Diag(Q_a^{-1}) - Q_1^{-1}` with `Diag(Q_a^{-1} - Q_{-1}^{-1})`, a form that fails the
/// finite-difference check and is kept only so tests can show it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GradientForm {
    #[default]
    Derived,
    AsPrinted,
}

struct Parts<T: Scalar> {
    /// `K = M C^H`.
    k: DMatrix<T>,
    x: DMatrix<T>,
    d: Vec<f64>,
}

fn parts<T: Scalar>(c: &DMatrix<T>, m: &DMatrix<T>) -> Result<Parts<T>> {
    let k = m * c.adjoint();
    let mut x = c * &k;
    linalg::mirror_lower(&mut x);
    let d: Vec<f64> = (0..x.nrows()).map(|i| x[(i, i)].real()).collect();
    if d.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Singular);
    }
    Ok(Parts { k, x, d })
}

fn prepare<T: Scalar>(c: &DMatrix<T>, problem: &AjdProblem<T>) -> Result<()> {
    check_same_dim(problem.dim(), c.nrows())?;
    check_invertible(c)
}

/// Gradient only, `O(K n^3)`.
pub fn gradient<T: Scalar>(c: &DMatrix<T>, problem: &AjdProblem<T>) -> Result<DMatrix<T>> {
    prepare(c, problem)?;
    let n = c.nrows();
    let mut g = DMatrix::zeros(n, n);
    let br = branch(problem.alpha());
    for (m, &w) in problem.matrices().iter().zip(problem.weights()) {
        let p = parts(c, m.as_matrix())?;
        g += coefficient_matrix(&p, br, GradientForm::Derived)? * p.k.adjoint() * T::from_real(2.0 * w);
    }
    Ok(g)
}

/// `E` such that the gradient of one matrix's term is `2 E C M`.
fn coefficient_matrix<T: Scalar>(p: &Parts<T>, br: Branch, form: GradientForm) -> Result<DMatrix<T>> {
    let n = p.x.nrows();
    let xinv = linalg::inverse_hpd(&p.x).ok_or(Error::Singular)?;
    let dinv = DMatrix::from_fn(n, n, |i, j| if i == j { T::from_real(1.0 / p.d[i]) } else { T::zero() });
    let e = match br {
        Branch::Left => &dinv - &xinv,
        Branch::Right => {
            let dm = DMatrix::from_fn(n, n, |i, j| if i == j { T::from_real(p.d[i]) } else { T::zero() });
            let w = &xinv * dm * &xinv;
            diag_of(&xinv) - w + &xinv - &dinv
        }
        Branch::Interior(alpha) => {
            let (ca, cb) = ((1.0 - alpha) / 2.0, (1.0 + alpha) / 2.0);
            let y = inverse_q(&p.x, &p.d, ca, cb)?;
            let scale = T::from_real(2.0 / (1.0 - alpha * alpha));
            let diag_term = match form {
                GradientForm::Derived => diag_of(&y) - &dinv,
                GradientForm::AsPrinted => diag_of(&(&y - &xinv)),
            };
            ((&y - &xinv) * T::from_real(1.0 - alpha) + diag_term * T::from_real(1.0 + alpha)) * scale
        }
    };
    Ok(e)
}

fn diag_of<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if i == j { m[(i, i)] } else { T::zero() })
}

fn inverse_q<T: Scalar>(x: &DMatrix<T>, d: &[f64], ca: f64, cb: f64) -> Result<DMatrix<T>> {
    let mut q = x * T::from_real(ca);
    for (i, di) in d.iter().enumerate() {
        q[(i, i)] += T::from_real(cb * di);
    }
    linalg::inverse_hpd(&q).ok_or(Error::Singular)
}

pub fn quadratic_model<T: Scalar>(c: &DMatrix<T>, problem: &AjdProblem<T>) -> Result<QuadraticModel<T>> {
    quadratic_model_with(c, problem, GradientForm::Derived)
}

pub fn quadratic_model_with<T: Scalar>(c: &DMatrix<T>, problem: &AjdProblem<T>, form: GradientForm) -> Result<QuadraticModel<T>> {
    prepare(c, problem)?;
    let n = c.nrows();
    let br = branch(problem.alpha());
    let mut acc = QuadraticModel::zeros(n);
    let mut logdet_x_weight = 0.0;
    for (m, &w) in problem.matrices().iter().zip(problem.weights()) {
        let mm = m.as_matrix();
        let p = parts(c, mm)?;
        acc.g += coefficient_matrix(&p, br, form)? * p.k.adjoint() * T::from_real(2.0 * w);
        match br {
            Branch::Left => {
                add_logdet_diag(&mut acc, w, &p, mm);
                logdet_x_weight -= w;
            }
            Branch::Right => {
                let y = linalg::inverse_hpd(&p.x).ok_or(Error::Singular)?;
                add_h(&mut acc, w, &y, &p, mm);
                add_logdet_diag(&mut acc, -w, &p, mm);
                logdet_x_weight += w;
            }
            Branch::Interior(alpha) => {
                let (ca, cb) = ((1.0 - alpha) / 2.0, (1.0 + alpha) / 2.0);
                let y = inverse_q(&p.x, &p.d, ca, cb)?;
                add_logdet_full(&mut acc, w * 4.0 / (1.0 - alpha * alpha), ca, cb, &y, &p.k, mm);
                add_logdet_diag(&mut acc, -w * 2.0 / (1.0 - alpha), &p, mm);
                logdet_x_weight -= w * 2.0 / (1.0 + alpha);
            }
        }
    }
    let cinv = c.clone().try_inverse().ok_or(Error::Singular)?;
    add_logdet_x(&mut acc, logdet_x_weight, &cinv);
    acc.symmetrize();
    Ok(acc)
}

/// Second-order terms of `w f_{a,b}` with `y = (a X + b Diag X)^{-1}`.
fn add_logdet_full<T: Scalar>(acc: &mut QuadraticModel<T>, w: f64, a: f64, b: f64, y: &DMatrix<T>, k: &DMatrix<T>, m: &DMatrix<T>) {
    let n = y.nrows();
    let r = y * T::from_real(a) + diag_of(y) * T::from_real(b);
    let pm = k * y;
    let omega = &pm * k.adjoint();
    let pt = pm.transpose();
    let kt = k.transpose();
    let (two, aa, ab2, bb) = (2.0 * w, -2.0 * a * a * w, -2.0 * a * b * w, -2.0 * b * b * w);
    for q in 0..n {
        for s in 0..n {
            let col = s + n * q;
            let k_qs = k[(q, s)];
            let ycol = y.column(s);
            let rcol = r.column(s);
            let ptq = pt.column(q);
            for rr in 0..n {
                let m_qr = m[(q, rr)] * T::from_real(two);
                let om_qr = omega[(q, rr)] * T::from_real(aa);
                let p_rs = pm[(rr, s)];
                let ktr = kt.column(rr);
                let hc1 = p_rs.conjugate() * k_qs;
                let sa = p_rs * T::from_real(aa);
                let sc1 = p_rs * k_qs;
                let base = n * rr;
                let mut hcol = acc.h.column_mut(col);
                for p in 0..n {
                    let y_ps = ycol[p];
                    let p_qp = ptq[p];
                    let k_rp = ktr[p];
                    let yy = T::from_real(y_ps.modulus_squared());
                    let hv = rcol[p] * m_qr + y_ps * om_qr + y_ps * (hc1 + p_qp * k_rp.conjugate()) * T::from_real(ab2)
                        + yy * k_rp.conjugate() * k_qs * T::from_real(bb);
                    hcol[base + p] += hv;
                }
                let mut scol = acc.s.column_mut(col);
                for p in 0..n {
                    let y_ps = ycol[p];
                    let p_qp = ptq[p];
                    let k_rp = ktr[p];
                    let yy = T::from_real(y_ps.modulus_squared());
                    let sv = sa * p_qp + (y_ps.conjugate() * sc1 + y_ps * p_qp * k_rp) * T::from_real(ab2) + yy * k_rp * k_qs * T::from_real(bb);
                    scol[base + p] += sv;
                }
            }
        }
    }
}

/// Second-order terms of `w sum_i log X_ii`.
fn add_logdet_diag<T: Scalar>(acc: &mut QuadraticModel<T>, w: f64, p: &Parts<T>, m: &DMatrix<T>) {
    let n = p.d.len();
    let k = &p.k;
    for (pp, dp) in p.d.iter().enumerate() {
        let h1 = 2.0 * w / dp;
        let h2 = -2.0 * w / (dp * dp);
        for q in 0..n {
            let col = pp + n * q;
            let k_qp = k[(q, pp)];
            for r in 0..n {
                let row = pp + n * r;
                let k_rp = k[(r, pp)];
                acc.h[(row, col)] += m[(q, r)] * T::from_real(h1) + k_rp.conjugate() * k_qp * T::from_real(h2);
                acc.s[(row, col)] += k_rp * k_qp * T::from_real(h2);
            }
        }
    }
}

/// Second-order terms of `w log det X = w (log det M + 2 log |det C|)`; only `S` is nonzero.
fn add_logdet_x<T: Scalar>(acc: &mut QuadraticModel<T>, w: f64, cinv: &DMatrix<T>) {
    let n = cinv.nrows();
    let f = T::from_real(-2.0 * w);
    for q in 0..n {
        for s in 0..n {
            let col = s + n * q;
            for r in 0..n {
                let c_rs = cinv[(r, s)] * f;
                for p in 0..n {
                    acc.s[(p + n * r, col)] += c_rs * cinv[(q, p)];
                }
            }
        }
    }
}

/// Second-order terms of `w tr(X^{-1} Diag X)` with `y = X^{-1}`.
fn add_h<T: Scalar>(acc: &mut QuadraticModel<T>, w: f64, y: &DMatrix<T>, p: &Parts<T>, m: &DMatrix<T>) {
    let n = y.nrows();
    let k = &p.k;
    let mut wm = y.clone();
    for j in 0..n {
        for i in 0..n {
            wm[(i, j)] = (0..n).map(|l| y[(i, l)] * T::from_real(p.d[l]) * y[(l, j)]).fold(T::zero(), |s, t| s + t);
        }
    }
    let e = diag_of(y) - &wm;
    let pm = k * y;
    let pw = k * &wm;
    let om_y = &pm * k.adjoint();
    let om_w = &pw * k.adjoint();
    let two = T::from_real(2.0 * w);
    for q in 0..n {
        for s in 0..n {
            let col = s + n * q;
            let k_qs = k[(q, s)];
            for r in 0..n {
                let row0 = n * r;
                let p_rs = pm[(r, s)];
                let pw_rs = pw[(r, s)];
                for pp in 0..n {
                    let row = row0 + pp;
                    let y_ps = y[(pp, s)];
                    let p_qp = pm[(q, pp)];
                    let k_rp = k[(r, pp)];
                    let hv = e[(pp, s)] * m[(q, r)] + om_y[(q, r)] * wm[(pp, s)] + om_w[(q, r)] * y_ps
                        - y_ps * (p_rs.conjugate() * k_qs + p_qp * k_rp.conjugate());
                    let sv = p_rs * pw[(q, pp)] + pw_rs * p_qp - (y_ps.conjugate() * p_rs * k_qs + y_ps * p_qp * k_rp);
                    acc.h[(row, col)] += hv * two;
                    acc.s[(row, col)] += sv * two;
                }
            }
        }
    }
}
