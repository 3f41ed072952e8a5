//! The Baxterized R-matrix `R(u) = ω(qu)P + ω(u)PX` and its defining
//! properties.

use alloc::format;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::model::{build_x, om, ModelParams};
use crate::operator::DenseMatrix;
use crate::residual;
use crate::C64;

/// The permutation `P = Σ e_ab ⊗ e_ba` on `C³ ⊗ C³`.
pub fn build_p() -> DenseMatrix {
    let mut p = DenseMatrix::zeros(9, 9);
    for a in 0..3 {
        for b in 0..3 {
            p[(3 * a + b, 3 * b + a)] = C64::new(1.0, 0.0);
        }
    }
    p
}

/// An R-matrix evaluated at a spectral parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct RMatrix {
    pub u: C64,
    pub matrix: DenseMatrix,
}

impl RMatrix {
    /// `R₂₁ = P R₁₂ P`.
    pub fn swapped(&self) -> DenseMatrix {
        swap_spaces(&self.matrix)
    }
}

fn nonzero(u: C64, what: &str) -> Result<()> {
    if u.is_zero() || !u.is_finite() {
        return Err(Error::InvalidParams(format!("{what} must be nonzero and finite, got {u}")));
    }
    Ok(())
}

pub fn build_r(u: C64, params: &ModelParams) -> Result<RMatrix> {
    nonzero(u, "spectral parameter")?;
    Ok(RMatrix { u, matrix: r_with_x(u, params.q(), &build_x(params)) })
}

/// `ω(qu)P + ω(u)PX` for an arbitrary 9×9 `X`.
pub fn r_with_x(u: C64, q: C64, x: &DenseMatrix) -> DenseMatrix {
    let p = build_p();
    let px = &p * x;
    p * om(q * u) + px * om(u)
}

/// `dR/du = (q + q⁻¹u⁻²)P + (1 + u⁻²)PX`.
pub fn r_derivative(u: C64, params: &ModelParams) -> Result<DenseMatrix> {
    nonzero(u, "spectral parameter")?;
    let q = params.q();
    let inv2 = (u * u).inv();
    let p = build_p();
    let px = &p * build_x(params);
    Ok(p * (q + q.inv() * inv2) + px * (C64::new(1.0, 0.0) + inv2))
}

/// `P M P` on `C³ ⊗ C³`.
pub fn swap_spaces(m: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(9, 9, |i, j| m[(3 * (i % 3) + i / 3, 3 * (j % 3) + j / 3)])
}

/// Transposes both tensor factors of a 9×9 matrix separately.
pub fn partial_transpose_both(m: &DenseMatrix) -> DenseMatrix {
    let t1 = DenseMatrix::from_fn(9, 9, |i, j| m[(3 * (j / 3) + i % 3, 3 * (i / 3) + j % 3)]);
    DenseMatrix::from_fn(9, 9, |i, j| t1[(3 * (i / 3) + j % 3, 3 * (j / 3) + i % 3)])
}

/// `ζ(u) = ω(u q⁻¹) ω(u⁻¹ q⁻¹)`.
pub fn zeta(u: C64, params: &ModelParams) -> C64 {
    let qi = params.q().inv();
    om(u * qi) * om(u.inv() * qi)
}

/// Embeddings of a 9×9 two-space operator into `C³ ⊗ C³ ⊗ C³`.
pub mod triple {
    use super::*;

    pub fn on_12(m: &DenseMatrix) -> DenseMatrix {
        m.kronecker(&DenseMatrix::identity(3, 3))
    }

    pub fn on_23(m: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::identity(3, 3).kronecker(m)
    }

    pub fn on_13(m: &DenseMatrix) -> DenseMatrix {
        let p23 = on_23(&build_p());
        &p23 * on_12(m) * &p23
    }
}

/// Residual of `R₁₂(u/v)R₁₃(u)R₂₃(v) = R₂₃(v)R₁₃(u)R₁₂(u/v)`.
pub fn check_yang_baxter(u: C64, v: C64, params: &ModelParams) -> Result<f64> {
    check_yang_baxter_with_x(u, v, params.q(), &build_x(params))
}

/// Yang-Baxter residual for an arbitrary `X`, used for negative controls.
pub fn check_yang_baxter_with_x(u: C64, v: C64, q: C64, x: &DenseMatrix) -> Result<f64> {
    nonzero(u, "u")?;
    nonzero(v, "v")?;
    let r12 = triple::on_12(&r_with_x(u / v, q, x));
    let r13 = triple::on_13(&r_with_x(u, q, x));
    let r23 = triple::on_23(&r_with_x(v, q, x));
    let lhs = &r12 * &r13 * &r23;
    let rhs = r23 * r13 * r12;
    Ok(residual::matrix(&lhs, &rhs))
}

/// Residual of `R₁₂(u)R₂₁(u⁻¹) = ζ(u) I`.
pub fn check_unitarity(u: C64, params: &ModelParams) -> Result<f64> {
    let r = build_r(u, params)?;
    let r21 = build_r(u.inv(), params)?.swapped();
    let lhs = &r.matrix * r21;
    let rhs = DenseMatrix::identity(9, 9) * zeta(u, params);
    Ok(residual::matrix(&lhs, &rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::model::Branch;

    fn params() -> ModelParams {
        ModelParams::new(2, c64(1.1, 0.2), Branch::Plus).unwrap()
    }

    #[test]
    fn permutation_properties() {
        let p = build_p();
        assert_eq!(&p * &p, DenseMatrix::identity(9, 9));
        assert_eq!(p.trace(), c64(3.0, 0.0));
        let v = nalgebra::DVector::from_vec(alloc::vec![c64(1.0, 0.0), c64(2.0, 1.0), c64(0.0, -1.0)]);
        let w = nalgebra::DVector::from_vec(alloc::vec![c64(0.5, 0.0), c64(0.0, 3.0), c64(1.0, 1.0)]);
        assert_eq!(&p * v.kronecker(&w), w.kronecker(&v));
    }

    #[test]
    fn regular_points() {
        let p = params();
        let r1 = build_r(c64(1.0, 0.0), &p).unwrap();
        assert!(residual::matrix(&r1.matrix, &(build_p() * om(p.q()))) < 1e-15);
        let rq = build_r(p.q().inv(), &p).unwrap();
        let expected = build_p() * build_x(&p) * om(p.q().inv());
        assert!(residual::matrix(&rq.matrix, &expected) < 1e-15);
        assert!(build_r(c64(0.0, 0.0), &p).is_err());
    }

    #[test]
    fn swap_is_double_partial_transpose() {
        let p = params();
        let r = build_r(c64(0.7, 0.9), &p).unwrap();
        assert!(residual::matrix(&r.swapped(), &partial_transpose_both(&r.matrix)) < 1e-14);
        assert!(residual::matrix(&r.swapped(), &(build_p() * &r.matrix * build_p())) < 1e-15);
    }

    #[test]
    fn yang_baxter_and_unitarity() {
        let p = params();
        let (u, v) = (c64(0.8, 0.5), c64(-1.2, 0.3));
        assert!(check_yang_baxter(u, v, &p).unwrap() < 1e-12);
        assert!(check_yang_baxter(u, u, &p).unwrap() < 1e-12);
        assert!(check_unitarity(u, &p).unwrap() < 1e-13);
        assert!(check_unitarity(c64(1.0, 0.0), &p).unwrap() < 1e-14);
        assert!((zeta(u, &p) - zeta(u.inv(), &p)).norm() < 1e-13);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = params();
        let u = c64(0.9, 0.4);
        let h = c64(1e-6, 0.0);
        let fd = (build_r(u + h, &p).unwrap().matrix - build_r(u - h, &p).unwrap().matrix) / (h * 2.0);
        assert!(residual::matrix(&r_derivative(u, &p).unwrap(), &fd) < 1e-9);
    }

    #[test]
    fn perturbed_generator_breaks_yang_baxter() {
        let p = params();
        let x = build_x(&p);
        let sym = DenseMatrix::from_fn(9, 9, |i, j| c64(((i * 7 + j * 7) % 5) as f64 * 0.1, 0.0));
        let (u, v) = (c64(0.8, 0.5), c64(-1.2, 0.3));
        let r1 = check_yang_baxter_with_x(u, v, p.q(), &(&x + &sym * c64(1e-4, 0.0))).unwrap();
        let r2 = check_yang_baxter_with_x(u, v, p.q(), &(&x + &sym * c64(2e-4, 0.0))).unwrap();
        assert!(r1 > 1e-7);
        assert!((r2 / r1 - 2.0).abs() < 0.05, "ratio {}", r2 / r1);
    }
}
