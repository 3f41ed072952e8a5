//! Scalar products of Bethe vectors: the determinant formula for an
//! on-shell dual vector against an arbitrary Bethe vector, the one-magnon
//! expansion from the `C(u)B(v)` relation, and annihilation of `⟨0|` by
//! `C₂` at a one-magnon root.
//!
//! Determinant orientation: the Jacobian has rows indexed by the on-shell
//! roots `uᵢ` and columns by `v_j`; the Cauchy-type kernel has rows indexed
//! by `vᵢ` and columns by `u_j`. At `M = 1` both reduce to the closed form.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use crate::bethe::{bethe_vector, dual_bethe_vector, normalized_residuals, RapiditySet};
use crate::coefficients::CoefficientContext;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{om, ModelParams};
use crate::monodromy::{Block, BlockAction, CbCoefficients, DENSE_MAX_SITES};
use crate::operator::{quantum_dim, reference_state, DenseMatrix};
use crate::C64;

/// On-shell threshold on the normalized Bethe residual of `ū`.
pub const ON_SHELL_TOLERANCE: f64 = 1e-9;

/// Guard for the joint regularity of `ū` and `v̄`.
pub const JOINT_GUARD: f64 = 1e-6;

/// An on-shell `ū` and an arbitrary `v̄` of the same size.
#[derive(Debug, Clone, PartialEq)]
pub struct SlavnovInput {
    ubar: RapiditySet,
    vbar: RapiditySet,
    params: ModelParams,
}

impl SlavnovInput {
    pub fn new(ubar: RapiditySet, vbar: RapiditySet, params: ModelParams) -> Result<Self> {
        if ubar.len() != vbar.len() {
            return Err(Error::Shape(alloc::format!("#ū = {} but #v̄ = {}", ubar.len(), vbar.len())));
        }
        let ctx = CoefficientContext::new(params);
        let worst = normalized_residuals(ubar.values(), &ctx)?.into_iter().fold(0.0, f64::max);
        if worst >= ON_SHELL_TOLERANCE {
            return Err(Error::NotOnShell { residual: worst });
        }
        let q = params.q();
        let check = |x: C64, factor: &'static str| {
            if om(x).norm() < JOINT_GUARD {
                Err(Error::Singular { function: "scalar product", factor })
            } else {
                Ok(())
            }
        };
        for (i, &u) in ubar.values().iter().enumerate() {
            check(u * u * q, "ω(uᵢ²q)")?;
            for &w in &ubar.values()[..i] {
                check(u * w, "ω(uᵢuⱼ)")?;
            }
        }
        for &v in vbar.values() {
            check(v * v * q * q, "ω(vᵢ²q²)")?;
            for &u in ubar.values() {
                check(v / u, "ω(vᵢ/uⱼ)")?;
                check(v * u * q, "ω(vᵢuⱼq)")?;
            }
        }
        Ok(Self { ubar, vbar, params })
    }

    pub fn ubar(&self) -> &RapiditySet {
        &self.ubar
    }

    pub fn vbar(&self) -> &RapiditySet {
        &self.vbar
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }
}

/// The determinant formula and its ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct SlavnovValue {
    pub value: C64,
    pub prefactor: C64,
    pub jacobian_det: C64,
    pub cauchy_det: C64,
    /// 2-norm condition number of the Cauchy-type kernel.
    pub cauchy_condition: f64,
}

/// `J[i][j] = ∂Λ(v_j, ū)/∂uᵢ`, analytic.
pub fn jacobian(ubar: &[C64], vbar: &[C64], ctx: &CoefficientContext) -> Result<DenseMatrix> {
    let m = ubar.len();
    let mut jac = DenseMatrix::zeros(m, vbar.len());
    for (j, &v) in vbar.iter().enumerate() {
        let mut pf = C64::new(1.0, 0.0);
        let mut ph = C64::new(1.0, 0.0);
        for &u in ubar {
            pf *= ctx.f(v, u)?;
            ph *= ctx.h(v, u)?;
        }
        let first = ctx.a(v)? * ctx.lambda1(v)? * pf;
        let second = ctx.d(v)? * ctx.lambda2(v)? * ph;
        for (i, &u) in ubar.iter().enumerate() {
            jac[(i, j)] = first * ctx.dlog_f(v, u)?.1 + second * ctx.dlog_h(v, u)?.1;
        }
    }
    Ok(jac)
}

/// Same matrix by complex central differences along the real and imaginary
/// directions; returns the two estimates.
pub fn jacobian_fd(ubar: &[C64], vbar: &[C64], ctx: &CoefficientContext, step: f64) -> Result<(DenseMatrix, DenseMatrix)> {
    let m = ubar.len();
    let mut re = DenseMatrix::zeros(m, vbar.len());
    let mut im = DenseMatrix::zeros(m, vbar.len());
    for (j, &v) in vbar.iter().enumerate() {
        for i in 0..m {
            for (dir, out) in [(C64::new(step, 0.0), &mut re), (C64::new(0.0, step), &mut im)] {
                let mut plus = ubar.to_vec();
                let mut minus = ubar.to_vec();
                plus[i] += dir;
                minus[i] -= dir;
                let d = crate::bethe::eigenvalue(v, &plus, ctx)? - crate::bethe::eigenvalue(v, &minus, ctx)?;
                out[(i, j)] = d / (dir * 2.0);
            }
        }
    }
    Ok((re, im))
}

/// `C[i][j] = 1/(ω(vᵢ/u_j) ω(vᵢu_j q))`.
pub fn cauchy_kernel(ubar: &[C64], vbar: &[C64], q: C64) -> DenseMatrix {
    DenseMatrix::from_fn(vbar.len(), ubar.len(), |i, j| {
        (om(vbar[i] / ubar[j]) * om(vbar[i] * ubar[j] * q)).inv()
    })
}

/// `(1/(2Q²))^M Πᵢ ω(uᵢ)^{2N} uᵢ ω(uᵢ²) / (ω(uᵢ²q) ω(vᵢ²q²)) Π_{j<i} ω(uᵢu_jq²)/ω(uᵢu_j)`.
pub fn prefactor(ubar: &[C64], vbar: &[C64], params: &ModelParams) -> C64 {
    let q = params.q();
    let bq2 = params.big_q() * params.big_q();
    let n2 = 2 * params.sites() as i32;
    let mut p = (bq2 * 2.0).inv().powi(ubar.len() as i32);
    for (i, (&u, &v)) in ubar.iter().zip(vbar).enumerate() {
        p *= om(u).powi(n2) * u * om(u * u) / (om(u * u * q) * om(v * v * q * q));
        for &w in &ubar[..i] {
            p *= om(u * w * q * q) / om(u * w);
        }
    }
    p
}

pub fn slavnov_formula(input: &SlavnovInput) -> Result<SlavnovValue> {
    let ctx = CoefficientContext::new(input.params);
    let (u, v) = (input.ubar.values(), input.vbar.values());
    let jac = jacobian(u, v, &ctx)?;
    let cauchy = cauchy_kernel(u, v, input.params.q());
    let jacobian_det = linalg::determinant(&jac);
    let cauchy_det = linalg::determinant(&cauchy);
    if cauchy_det.is_zero() || !cauchy_det.is_finite() {
        return Err(Error::Numerical("singular Cauchy-type kernel".into()));
    }
    let prefactor = prefactor(u, v, &input.params);
    Ok(SlavnovValue {
        value: prefactor * jacobian_det / cauchy_det,
        prefactor,
        jacobian_det,
        cauchy_det,
        cauchy_condition: if u.is_empty() { 1.0 } else { linalg::condition_number(&cauchy) },
    })
}

/// `⟨ū|v̄⟩ = ⟨0|C(u_M)⋯C(u₁)B(v₁)⋯B(v_M)|0⟩`, without conjugation.
pub fn direct_scalar_product(ubar: &[C64], vbar: &[C64], params: &ModelParams) -> Result<C64> {
    if params.sites() > DENSE_MAX_SITES {
        return Err(Error::DimensionCap {
            operation: "direct scalar product",
            dim: quantum_dim(params.sites()),
            cap: quantum_dim(DENSE_MAX_SITES),
        });
    }
    let left = dual_bethe_vector(ubar, params)?;
    let right = bethe_vector(vbar, params)?;
    Ok(left.dot(&right))
}

/// Side-by-side values of the formula and the direct product.
#[derive(Debug, Clone, PartialEq)]
pub struct SlavnovComparison {
    pub slavnov: SlavnovValue,
    pub direct: C64,
    pub relative_error: f64,
}

pub fn compare(input: &SlavnovInput) -> Result<SlavnovComparison> {
    let slavnov = slavnov_formula(input)?;
    let direct = direct_scalar_product(input.ubar.values(), input.vbar.values(), &input.params)?;
    let relative_error = (slavnov.value - direct).norm() / direct.norm().max(slavnov.value.norm());
    Ok(SlavnovComparison { slavnov, direct, relative_error })
}

/// `⟨u₁|v₁⟩` against its expansion through the `C(u)B(v)` relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneMagnonExpansion {
    pub direct: C64,
    pub expansion: C64,
    /// `⟨0|C₂(u₁)B₂(v₁)|0⟩`.
    pub c2b2: C64,
    pub residual: f64,
    /// Residual with the `C₂B₂` term dropped.
    pub residual_without_c2b2: f64,
}

pub fn check_m1_expansion(u1: C64, v1: C64, params: &ModelParams) -> Result<OneMagnonExpansion> {
    let ctx = CoefficientContext::new(*params);
    let k = CbCoefficients::new(u1, v1, &ctx)?;
    let x = k.x;
    let q = params.q();
    let bq2 = params.big_q() * params.big_q();
    let (l1u, l2u, l1v, l2v) = (ctx.lambda1(u1)?, ctx.lambda2(u1)?, ctx.lambda1(v1)?, ctx.lambda2(v1)?);
    let su = om(u1 * u1) / (bq2 * om(q * u1 * u1));
    let sv = om(v1 * v1) / (bq2 * om(q * v1 * v1));
    let zero = reference_state(params.sites());
    let left = BlockAction::new(u1, params)?.apply_left(Block::C2, &zero);
    let right = BlockAction::new(v1, params)?.apply(Block::B2, &zero);
    let c2b2 = left.dot(&right);
    let without = (x[0] + x[1]) * l1u * l1v - sv * x[3] * l1u * l2v - su * (x[2] + x[4]) * l2u * l1v
        + su * sv * x[5] * l2u * l2v;
    let expansion = without - c2b2;
    let direct = direct_scalar_product(&[u1], &[v1], params)?;
    let rel = |a: C64| (direct - a).norm() / direct.norm().max(a.norm());
    Ok(OneMagnonExpansion {
        direct,
        expansion,
        c2b2,
        residual: rel(expansion),
        residual_without_c2b2: rel(without),
    })
}

/// Annihilation of `⟨0|` by `C₂(u₁)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C2Annihilation {
    pub u1: C64,
    /// `‖⟨0|C₂(u₁)‖ / ‖C₂(u₁)‖_F`.
    pub ratio: f64,
    pub row_norm: f64,
    pub frobenius: f64,
}

/// `‖⟨0|C₂(u₁)‖ / ‖C₂(u₁)‖_F` with no on-shell requirement.
pub fn c2_annihilation_ratio(u1: C64, params: &ModelParams) -> Result<C2Annihilation> {
    let act = BlockAction::new(u1, params)?;
    let row_norm = act.apply_left(Block::C2, &reference_state(params.sites())).norm();
    let frobenius = act.frobenius_norm(Block::C2);
    Ok(C2Annihilation { u1, ratio: row_norm / frobenius.max(f64::MIN_POSITIVE), row_norm, frobenius })
}

/// As [`c2_annihilation_ratio`], after checking `Λ₁(u₁) = Λ₂(u₁)`.
pub fn check_c2_annihilation(u1: C64, params: &ModelParams) -> Result<C2Annihilation> {
    let ctx = CoefficientContext::new(*params);
    let r = normalized_residuals(&[u1], &ctx)?[0];
    if r >= ON_SHELL_TOLERANCE {
        return Err(Error::NotOnShell { residual: r });
    }
    c2_annihilation_ratio(u1, params)
}

/// `⟨ū|v̄⟩` along `vᵢ = uᵢ(1 + ε)` for each `ε`, followed by `v̄ = ū`.
pub fn norm_limit(ubar: &[C64], params: &ModelParams, eps: &[f64]) -> Result<Vec<C64>> {
    let mut out: Vec<C64> = eps
        .iter()
        .map(|&e| {
            let v: Vec<C64> = ubar.iter().map(|u| u * (1.0 + e)).collect();
            direct_scalar_product(ubar, &v, params)
        })
        .collect::<Result<_>>()?;
    out.push(direct_scalar_product(ubar, ubar, params)?);
    Ok(out)
}
