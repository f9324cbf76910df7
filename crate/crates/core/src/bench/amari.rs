use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Amari-Moreau performance index of a global matrix `m = C A`:
/// `1/(2p(p-1)) [sum_i (sum_j |m_ij| / max_l |m_il| - 1) + sum_j (sum_i |m_ij| / max_l |m_lj| - 1)]`.
///
/// Zero exactly when `m` is a scaled permutation; at most one.
pub fn amari_moreau<T: Scalar>(m: &DMatrix<T>) -> Result<f64> {
    let p = m.nrows();
    if m.ncols() != p {
        return Err(Error::NotSquare { rows: p, cols: m.ncols() });
    }
    if p < 2 {
        return Err(Error::domain("performance index needs at least a 2x2 matrix"));
    }
    let a = m.map(|v| v.modulus());
    let mut total = 0.0;
    for i in 0..p {
        let row = a.row(i);
        let mx = row.max();
        if !(mx > 0.0) {
            return Err(Error::domain(format!("row {i} of the global matrix is zero")));
        }
        total += row.sum() / mx - 1.0;
    }
    for j in 0..p {
        let col = a.column(j);
        let mx = col.max();
        if !(mx > 0.0) {
            return Err(Error::domain(format!("column {j} of the global matrix is zero")));
        }
        total += col.sum() / mx - 1.0;
    }
    Ok(total / (2.0 * p as f64 * (p as f64 - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_permutation_scores_zero() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, -2.0, 0.0, 0.0, 0.0, 5.0, 0.1, 0.0, 0.0]);
        assert_eq!(amari_moreau(&m).unwrap(), 0.0);
    }

    #[test]
    fn all_ones_scores_one() {
        assert!((amari_moreau(&DMatrix::from_element(4, 4, 1.0)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_row_is_an_error() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(amari_moreau(&m).is_err());
    }
}
