//! Scale-free residuals used by every identity check.

use nalgebra::{DMatrix, DVector};

use crate::C64;

/// `‖lhs − rhs‖_F / max(‖lhs‖_F, ‖rhs‖_F, 1)`.
pub fn matrix(lhs: &DMatrix<C64>, rhs: &DMatrix<C64>) -> f64 {
    let diff = (lhs - rhs).norm();
    diff / lhs.norm().max(rhs.norm()).max(1.0)
}

pub fn vector(lhs: &DVector<C64>, rhs: &DVector<C64>) -> f64 {
    let diff = (lhs - rhs).norm();
    diff / lhs.norm().max(rhs.norm()).max(1.0)
}

pub fn scalar(lhs: C64, rhs: C64) -> f64 {
    (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1.0)
}

/// Residual of `Σ terms = rhs`, normalized by the largest individual
/// magnitude so that cancellations are measured against their own scale.
pub fn sum_identity(terms: &[C64], rhs: C64) -> f64 {
    let total: C64 = terms.iter().sum();
    let scale = terms
        .iter()
        .map(|t| t.norm())
        .fold(rhs.norm(), f64::max)
        .max(1.0);
    (total - rhs).norm() / scale
}
