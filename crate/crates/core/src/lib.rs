//! Diagonality measures for Hermitian positive-definite matrices, closest-diagonal projections,
//! log-det alpha-divergence approximate joint diagonalization, AJD-based matrix means and a
//! blind-source-separation benchmark harness.

// `!(x > 0.0)` is used on purpose so NaN is rejected along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ajd;
pub mod bench;
pub mod error;
pub mod hpd;
pub mod io;
pub mod kron;
pub mod means;
pub mod measures;
pub mod projections;
pub mod random;
mod linalg;
pub mod scalar;

pub use error::{Error, Result};
pub use hpd::{DiagonalPdMatrix, HermitianMatrix, HpdMatrix, MatrixFunction};
pub use scalar::{Scalar, C64};
