//! Scalar coefficient functions of the Bethe ansatz and the functional
//! identities among them.
//!
//! Every function is a rational function of its arguments and of `(q, Q)`.
//! Each denominator factor is checked before division; a vanishing factor is
//! reported by name as [`Error::Singular`].
//!
//! `h₂(u, v)` carries `ω(quv)` in its denominator. This is the form for which
//! the exchange relation `D(u)B(v)` and the identity
//! `a(u)f₁(u,v) + Q²h₂(u,v) = H(u,v)` both hold; with `ω(qv)` in place of
//! `ω(quv)` neither does.

use alloc::vec::Vec;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::model::{om, ModelParams};
use crate::residual;
use crate::C64;

/// `|ω(·)|` below this counts as a vanishing denominator factor.
pub const SINGULAR_GUARD: f64 = 1e-12;

/// Derivative of `log ω(x)` with respect to `w` when `x ∝ w^p`.
#[inline]
pub fn dlog_omega(x: C64, p: f64, w: C64) -> C64 {
    let x2 = x * x;
    (x2 + 1.0) / ((x2 - 1.0) * w) * p
}

/// Functions of one or two spectral parameters, addressable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basic {
    D,
    A,
    Y,
    Lambda1,
    Lambda2,
    Zeta,
    F,
    F1,
    F2,
    F3,
    H,
    H1,
    H2,
    H3,
    /// `H(u, v)` of the off-shell equation.
    BigH,
}

impl Basic {
    pub fn needs_v(self) -> bool {
        !matches!(self, Basic::D | Basic::A | Basic::Y | Basic::Lambda1 | Basic::Lambda2 | Basic::Zeta)
    }
}

/// Coefficients of the `C(u)B(v)` commutation relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum A7 {
    X1,
    X2,
    X3,
    X4,
    X5,
    X6,
    Y1,
    Y2,
    Y3,
}

impl A7 {
    pub const ALL: [A7; 9] = [A7::X1, A7::X2, A7::X3, A7::X4, A7::X5, A7::X6, A7::Y1, A7::Y2, A7::Y3];
}

/// Evaluates the coefficient functions for a fixed parameter point.
#[derive(Debug, Clone, Copy)]
pub struct CoefficientContext {
    params: ModelParams,
}

impl CoefficientContext {
    pub fn new(params: ModelParams) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    fn q(&self) -> C64 {
        self.params.q()
    }

    fn big_q2(&self) -> C64 {
        let qq = self.params.big_q();
        qq * qq
    }

    /// `q + q⁻¹`.
    fn qsum(&self) -> C64 {
        self.q() + self.q().inv()
    }

    fn nonzero_arg(&self, function: &'static str, u: C64) -> Result<()> {
        if u.is_zero() || !u.is_finite() {
            return Err(Error::Singular { function, factor: "u = 0" });
        }
        Ok(())
    }

    /// Returns `ω(x)` if it is safely away from zero.
    fn den(&self, function: &'static str, factor: &'static str, x: C64) -> Result<C64> {
        let w = om(x);
        if w.norm() < SINGULAR_GUARD || !w.is_finite() {
            return Err(Error::Singular { function, factor });
        }
        Ok(w)
    }

    fn args(&self, function: &'static str, u: C64, v: C64) -> Result<()> {
        self.nonzero_arg(function, u)?;
        self.nonzero_arg(function, v)
    }

    pub fn eval_basic(&self, name: Basic, u: C64, v: Option<C64>) -> Result<C64> {
        let two = |v: Option<C64>| {
            v.ok_or(Error::InvalidParams(alloc::format!("{name:?} needs two arguments")))
        };
        match name {
            Basic::D => self.d(u),
            Basic::A => self.a(u),
            Basic::Y => self.y(u),
            Basic::Lambda1 => self.lambda1(u),
            Basic::Lambda2 => self.lambda2(u),
            Basic::Zeta => self.zeta(u),
            Basic::F => self.f(u, two(v)?),
            Basic::F1 => self.f1(u, two(v)?),
            Basic::F2 => self.f2(u, two(v)?),
            Basic::F3 => self.f3(u, two(v)?),
            Basic::H => self.h(u, two(v)?),
            Basic::H1 => self.h1(u, two(v)?),
            Basic::H2 => self.h2(u, two(v)?),
            Basic::H3 => self.h3(u, two(v)?),
            Basic::BigH => self.big_h(u, two(v)?),
        }
    }

    /// `d(u) = −ω(u²)/ω(qu²)`.
    pub fn d(&self, u: C64) -> Result<C64> {
        self.nonzero_arg("d", u)?;
        let den = self.den("d", "ω(qu²)", self.q() * u * u)?;
        Ok(-om(u * u) / den)
    }

    /// `a(u) = −ω(q²u²)/ω(qu²)`.
    pub fn a(&self, u: C64) -> Result<C64> {
        self.nonzero_arg("a", u)?;
        let q = self.q();
        let den = self.den("a", "ω(qu²)", q * u * u)?;
        Ok(-om(q * q * u * u) / den)
    }

    /// `y(u) = 1 − Q⁻²d(u)`.
    pub fn y(&self, u: C64) -> Result<C64> {
        Ok(C64::new(1.0, 0.0) - self.d(u)? / self.big_q2())
    }

    /// `Λ₁(u) = ω(qu)^{2N}`.
    pub fn lambda1(&self, u: C64) -> Result<C64> {
        self.nonzero_arg("Λ₁", u)?;
        Ok(om(self.q() * u).powi(2 * self.params.sites() as i32))
    }

    /// `Λ₂(u) = ω(u)^{2N}`.
    pub fn lambda2(&self, u: C64) -> Result<C64> {
        self.nonzero_arg("Λ₂", u)?;
        Ok(om(u).powi(2 * self.params.sites() as i32))
    }

    /// `ζ(u) = ω(uq⁻¹)ω(u⁻¹q⁻¹)`.
    pub fn zeta(&self, u: C64) -> Result<C64> {
        self.nonzero_arg("ζ", u)?;
        let qi = self.q().inv();
        Ok(om(u * qi) * om(u.inv() * qi))
    }

    /// `f(u,v) = ω(uq⁻¹v⁻¹)ω(uv) / (ω(uv⁻¹)ω(quv))`.
    pub fn f(&self, u: C64, v: C64) -> Result<C64> {
        self.args("f", u, v)?;
        let q = self.q();
        let d1 = self.den("f", "ω(u/v)", u / v)?;
        let d2 = self.den("f", "ω(quv)", q * u * v)?;
        Ok(om(u / (q * v)) * om(u * v) / (d1 * d2))
    }

    /// `f₁(u,v) = ω(v²)(ω(qv/u) + Q⁻²ω(v/u)) / (ω(qv²)ω(u/v))`.
    pub fn f1(&self, u: C64, v: C64) -> Result<C64> {
        self.args("f₁", u, v)?;
        let q = self.q();
        let d1 = self.den("f₁", "ω(qv²)", q * v * v)?;
        let d2 = self.den("f₁", "ω(u/v)", u / v)?;
        Ok(om(v * v) / (d1 * d2) * (om(q * v / u) + om(v / u) / self.big_q2()))
    }

    /// `f₂(u,v) = −1 − Q²ω(uv)/ω(quv)`.
    pub fn f2(&self, u: C64, v: C64) -> Result<C64> {
        self.args("f₂", u, v)?;
        let d = self.den("f₂", "ω(quv)", self.q() * u * v)?;
        Ok(-C64::new(1.0, 0.0) - self.big_q2() * om(u * v) / d)
    }

    /// `f₃(u,v) = −ω(uv)/ω(quv)`.
    pub fn f3(&self, u: C64, v: C64) -> Result<C64> {
        self.args("f₃", u, v)?;
        let d = self.den("f₃", "ω(quv)", self.q() * u * v)?;
        Ok(-om(u * v) / d)
    }

    /// `h(u,v) = ω(uq/v)ω(q²uv) / (ω(u/v)ω(quv))`.
    pub fn h(&self, u: C64, v: C64) -> Result<C64> {
        self.args("h", u, v)?;
        let q = self.q();
        let d1 = self.den("h", "ω(u/v)", u / v)?;
        let d2 = self.den("h", "ω(quv)", q * u * v)?;
        Ok(om(u * q / v) * om(q * q * u * v) / (d1 * d2))
    }

    /// `h₁(u,v) = ω(q²u²)((1+Q⁻²)ω(qu/v) + ω(q²u/v)) / (Q²ω(qu²)ω(u/v))`.
    pub fn h1(&self, u: C64, v: C64) -> Result<C64> {
        self.args("h₁", u, v)?;
        let q = self.q();
        let bq2 = self.big_q2();
        let d1 = self.den("h₁", "ω(qu²)", q * u * u)?;
        let d2 = self.den("h₁", "ω(u/v)", u / v)?;
        let bracket = (bq2.inv() + 1.0) * om(q * u / v) + om(q * q * u / v);
        Ok(om(q * q * u * u) / (bq2 * d1 * d2) * bracket)
    }

    /// `h₂(u,v) = ω(q²u²)ω(v²)((1+Q⁻²)ω(q²uv) + ω(q³uv)) / (Q⁴ω(qu²)ω(quv)ω(qv²))`.
    pub fn h2(&self, u: C64, v: C64) -> Result<C64> {
        self.args("h₂", u, v)?;
        let q = self.q();
        let bq2 = self.big_q2();
        let d1 = self.den("h₂", "ω(qu²)", q * u * u)?;
        let d2 = self.den("h₂", "ω(quv)", q * u * v)?;
        let d3 = self.den("h₂", "ω(qv²)", q * v * v)?;
        let bracket = (bq2.inv() + 1.0) * om(q * q * u * v) + om(q * q * q * u * v);
        Ok(om(q * q * u * u) * om(v * v) / (bq2 * bq2 * d1 * d2 * d3) * bracket)
    }

    /// `h₃(u,v) = (q − q⁻¹)ω(qu/v) / (Q²ω(qu²)ω(quv))`.
    pub fn h3(&self, u: C64, v: C64) -> Result<C64> {
        self.args("h₃", u, v)?;
        let q = self.q();
        let d1 = self.den("h₃", "ω(qu²)", q * u * u)?;
        let d2 = self.den("h₃", "ω(quv)", q * u * v)?;
        Ok(om(q) * om(q * u / v) / (self.big_q2() * d1 * d2))
    }

    /// `H(u,v) = (q − q⁻¹)ω(q²u²)d(v) / (ω(u/v)ω(quv))`.
    pub fn big_h(&self, u: C64, v: C64) -> Result<C64> {
        self.args("H", u, v)?;
        let q = self.q();
        let d1 = self.den("H", "ω(u/v)", u / v)?;
        let d2 = self.den("H", "ω(quv)", q * u * v)?;
        Ok(om(q) * om(q * q * u * u) / (d1 * d2) * self.d(v)?)
    }

    /// `(∂_u log f, ∂_v log f)`.
    pub fn dlog_f(&self, u: C64, v: C64) -> Result<(C64, C64)> {
        self.f(u, v)?;
        let q = self.q();
        let du = dlog_omega(u / (q * v), 1.0, u) + dlog_omega(u * v, 1.0, u)
            - dlog_omega(u / v, 1.0, u)
            - dlog_omega(q * u * v, 1.0, u);
        let dv = dlog_omega(u / (q * v), -1.0, v) + dlog_omega(u * v, 1.0, v)
            - dlog_omega(u / v, -1.0, v)
            - dlog_omega(q * u * v, 1.0, v);
        Ok((du, dv))
    }

    /// `(∂_u log h, ∂_v log h)`.
    pub fn dlog_h(&self, u: C64, v: C64) -> Result<(C64, C64)> {
        self.h(u, v)?;
        let q = self.q();
        let du = dlog_omega(u * q / v, 1.0, u) + dlog_omega(q * q * u * v, 1.0, u)
            - dlog_omega(u / v, 1.0, u)
            - dlog_omega(q * u * v, 1.0, u);
        let dv = dlog_omega(u * q / v, -1.0, v) + dlog_omega(q * q * u * v, 1.0, v)
            - dlog_omega(u / v, -1.0, v)
            - dlog_omega(q * u * v, 1.0, v);
        Ok((du, dv))
    }

    /// `d/du log Λ₁(u)`.
    pub fn dlog_lambda1(&self, u: C64) -> C64 {
        dlog_omega(self.q() * u, 1.0, u) * (2 * self.params.sites()) as f64
    }

    /// `d/du log Λ₂(u)`.
    pub fn dlog_lambda2(&self, u: C64) -> C64 {
        dlog_omega(u, 1.0, u) * (2 * self.params.sites()) as f64
    }

    /// `r_i = −((1 + Q²)/Q⁴)^i`.
    pub fn r(&self, i: usize) -> C64 {
        let bq2 = self.big_q2();
        -((bq2 + 1.0) / (bq2 * bq2)).powi(i as i32)
    }

    /// `s_i = Q⁻²((1 + Q²)/Q⁴)^{i−1}` for `i ≥ 1`.
    pub fn s(&self, i: usize) -> Result<C64> {
        if i == 0 {
            return Err(Error::OutOfRange { what: "s_i index", value: 0, allowed: "≥ 1".into() });
        }
        let bq2 = self.big_q2();
        Ok(((bq2 + 1.0) / (bq2 * bq2)).powi(i as i32 - 1) / bq2)
    }

    pub fn eval_a7(&self, name: A7, u: C64, v: C64) -> Result<C64> {
        self.args("A7", u, v)?;
        let q = self.q();
        let bq2 = self.big_q2();
        let fname = match name {
            A7::X1 => "x₁",
            A7::X2 => "x₂",
            A7::X3 => "x₃",
            A7::X4 => "x₄",
            A7::X5 => "x₅",
            A7::X6 => "x₆",
            A7::Y1 => "y₁",
            A7::Y2 => "y₂",
            A7::Y3 => "y₃",
        };
        // Frequently shared pieces.
        let w_qv2 = || self.den(fname, "ω(qv²)", q * v * v);
        let w_qu2 = || self.den(fname, "ω(qu²)", q * u * u);
        let w_quv = || self.den(fname, "ω(quv)", q * u * v);
        let w_vu = || self.den(fname, "ω(v/u)", v / u);
        let w_uv_ratio = || self.den(fname, "ω(u/v)", u / v);
        let v_bracket = bq2 * om(q * v * v) + om(v * v);
        Ok(match name {
            A7::X1 => {
                om(u * u) * v_bracket * (om(q * u / v) + om(u / v) / bq2)
                    / (bq2 * w_qu2()? * w_qv2()? * w_vu()?)
            }
            A7::X2 => {
                om(u * u) * om(q * u / v) * (om(q * u * v) + om(u * v) / bq2)
                    / (w_qu2()? * w_uv_ratio()? * w_quv()?)
            }
            A7::X3 => -v_bracket * (om(q * u * v) + bq2 * om(u * v)) / (bq2 * w_qv2()? * w_quv()?),
            A7::X4 => om(u * u) * (om(q * u / v) + om(u / v) / bq2) / (w_qu2()? * w_vu()?),
            A7::X5 => om(u * v) * (om(q * u / v) + bq2 * om(u / v)) / (w_uv_ratio()? * w_quv()?),
            A7::X6 => -(om(q * u * v) + bq2 * om(u * v)) / w_quv()?,
            A7::Y1 => om(u * v) / w_quv()?,
            A7::Y2 => -om(u * v) * v_bracket / (bq2 * w_qv2()? * w_quv()?),
            A7::Y3 => -om(u * v) / w_quv()?,
        })
    }

    /// `Π_{j ∈ range, j ≠ skip} g(x, ū_j)` over 1-based indices of `ubar`.
    fn prod<G>(&self, g: G, x: C64, ubar: &[C64], from: usize, to: usize, skip: usize) -> Result<C64>
    where
        G: Fn(&Self, C64, C64) -> Result<C64>,
    {
        let mut acc = C64::new(1.0, 0.0);
        for j in from..=to {
            if j != skip {
                acc *= g(self, x, ubar[j - 1])?;
            }
        }
        Ok(acc)
    }

    /// The `(q + q⁻¹) Σ_k r_{k−2}(…)` tail shared by `α^M`, `δ^M` and the
    /// operator-valued `Z` sums, with `u_M` replaced by `last`:
    /// `Σ_{k=2}^{i} r_{k−2}(−Q⁻²d(u_i)·cf·Π_{j=k..m, j≠i} f(u_i,u_j) + ch·Π h)`.
    fn r_tail(&self, i: usize, ubar: &[C64], m: usize, cf: C64, ch: C64) -> Result<C64> {
        let ui = ubar[i - 1];
        let di = self.d(ui)?;
        let mut acc = C64::zero();
        for k in 2..=i {
            let pf = self.prod(Self::f, ui, ubar, k, m, i)?;
            let ph = self.prod(Self::h, ui, ubar, k, m, i)?;
            acc += self.r(k - 2) * (-di / self.big_q2() * cf * pf + ch * ph);
        }
        Ok(acc * self.qsum())
    }

    /// `α^M({u, ū})` with `M = ū.len() ≥ 1`.
    pub fn alpha_m(&self, u: C64, ubar: &[C64]) -> Result<C64> {
        let m = ubar.len();
        if m == 0 {
            return Err(Error::OutOfRange { what: "M for α^M", value: 0, allowed: "≥ 1".into() });
        }
        let um = ubar[m - 1];
        let mut acc = self.f3(u, um)? * self.prod(Self::f, u, ubar, 1, m - 1, 0)?;
        for i in 1..m {
            let ui = ubar[i - 1];
            let f3i = self.f3(ui, um)?;
            let h3i = self.h3(ui, um)?;
            acc += self.f1(u, ui)? * f3i * self.prod(Self::f, ui, ubar, 1, m - 1, i)?;
            acc += self.f2(u, ui)? * h3i * self.prod(Self::h, ui, ubar, 1, m - 1, i)?;
            acc += self.r_tail(i, ubar, m - 1, f3i, h3i)?;
        }
        Ok(acc)
    }

    /// `δ^M({u, ū})` with `M = ū.len() ≥ 1`. Depends on `u` also through
    /// `a(u)` in the `r`-tail.
    pub fn delta_m(&self, u: C64, ubar: &[C64]) -> Result<C64> {
        let m = ubar.len();
        if m == 0 {
            return Err(Error::OutOfRange { what: "M for δ^M", value: 0, allowed: "≥ 1".into() });
        }
        let um = ubar[m - 1];
        let abar = self.a(u)? / self.big_q2();
        let mut acc = self.h3(u, um)? * self.prod(Self::h, u, ubar, 1, m - 1, 0)?;
        for i in 1..m {
            let ui = ubar[i - 1];
            let f3i = self.f3(ui, um)?;
            let h3i = self.h3(ui, um)?;
            acc += self.h1(u, ui)? * h3i * self.prod(Self::h, ui, ubar, 1, m - 1, i)?;
            acc += self.h2(u, ui)? * f3i * self.prod(Self::f, ui, ubar, 1, m - 1, i)?;
            acc -= abar * self.r_tail(i, ubar, m - 1, f3i, h3i)?;
        }
        Ok(acc)
    }

    /// The two identities that collapse the `A` and `D` actions into the
    /// off-shell equation:
    /// `a(u)f₁ + Q²h₂ = H` and `a(u)f₂ + Q²h₁ = −Q²H/d(v)`.
    pub fn check_identity_332(&self, u: C64, v: C64) -> Result<(f64, f64)> {
        let bq2 = self.big_q2();
        let a = self.a(u)?;
        let big_h = self.big_h(u, v)?;
        let dv = self.d(v)?;
        if dv.norm() < SINGULAR_GUARD {
            return Err(Error::Singular { function: "(a f₂ + Q² h₁) identity", factor: "ω(v²)" });
        }
        let first = residual::sum_identity(&[a * self.f1(u, v)?, bq2 * self.h2(u, v)?], big_h);
        let second = residual::sum_identity(&[a * self.f2(u, v)?, bq2 * self.h1(u, v)?], -bq2 / dv * big_h);
        Ok((first, second))
    }

    /// Evaluates the `γ, θ, τ` scalars and their barred analogues for the
    /// rapidities `{u_1, …, u_{M+1}}` and checks the ten functional identities
    /// they satisfy.
    pub fn check_appendix_b(&self, u: C64, ubar: &[C64]) -> Result<AppendixBReport> {
        let b = self.appendix_b_terms(u, ubar)?;
        let m = ubar.len() - 1;
        let um = &ubar[..m];
        let abar = self.a(u)? / self.big_q2();
        let r_m = self.r(m);
        let alpha_full = self.alpha_m(u, ubar)?;
        let delta_full = self.delta_m(u, ubar)?;
        let (alpha_m, delta_m, s_m) = if m >= 1 {
            (self.alpha_m(u, um)?, self.delta_m(u, um)?, self.s(m)?)
        } else {
            (C64::zero(), C64::zero(), C64::zero())
        };
        let si = residual::sum_identity;
        let mut residuals = [0.0; 10];
        residuals[0] = si(&[b.gamma.a, b.theta.a, b.tau.a], C64::zero());
        residuals[1] = si(&[b.gamma.d, b.theta.d, b.tau.d], C64::zero());
        residuals[2] = si(&[b.gamma.e, b.theta.e, b.tau.e], alpha_full);
        residuals[3] = si(&[b.gamma.b2, b.theta.b2, b.tau.b2], r_m);
        residuals[4] = if m >= 1 { si(&[b.theta.b, b.tau.b, alpha_m], s_m) } else { 0.0 };
        residuals[5] = si(&[b.gamma_bar.a, b.theta_bar.a, -abar * b.tau.a], C64::zero());
        residuals[6] = si(&[b.gamma_bar.d, b.theta_bar.d, -abar * b.tau.d], C64::zero());
        residuals[7] = si(&[b.gamma_bar.e, b.theta_bar.e, -abar * b.tau.e], delta_full);
        residuals[8] = si(&[b.gamma_bar.b2, b.theta_bar.b2, -abar * b.tau.b2], -abar * r_m);
        residuals[9] = if m >= 1 {
            si(&[b.gamma_bar.b, b.theta_bar.b, -abar * b.tau.b, delta_m], -abar * s_m)
        } else {
            0.0
        };
        Ok(AppendixBReport { m, residuals })
    }

    /// `γ_{b₂} + θ_{b₂} + τ_{b₂}`, whose large-`u` limit is `r_M`.
    pub fn b2_combination(&self, u: C64, ubar: &[C64]) -> Result<C64> {
        let b = self.appendix_b_terms(u, ubar)?;
        Ok(b.gamma.b2 + b.theta.b2 + b.tau.b2)
    }

    /// Evaluates `γ, θ, τ, γ̄, θ̄` for `{u_1, …, u_{M+1}}` (`ubar.len() ≥ 1`).
    pub fn appendix_b_terms(&self, u: C64, ubar: &[C64]) -> Result<AppendixBTerms> {
        if ubar.is_empty() {
            return Err(Error::OutOfRange { what: "rapidity count", value: 0, allowed: "≥ 1 (M + 1)".into() });
        }
        let m = ubar.len() - 1;
        let un = ubar[m];
        let bq2 = self.big_q2();
        let qs = self.qsum();

        let pf = self.prod(Self::f, u, ubar, 1, m, 0)?;
        let ph = self.prod(Self::h, u, ubar, 1, m, 0)?;
        let pf_n = self.prod(Self::f, un, ubar, 1, m, 0)?;
        let ph_n = self.prod(Self::h, un, ubar, 1, m, 0)?;

        let gamma = Quintet {
            a: self.f1(u, un)? * pf,
            d: self.f2(u, un)? * pf,
            e: self.f3(u, un)? * pf,
            b2: -pf,
            b: C64::zero(),
        };
        let gamma_bar = Quintet {
            a: self.h2(u, un)? * ph,
            d: self.h1(u, un)? * ph,
            e: self.h3(u, un)? * ph,
            b2: self.a(u)? / bq2 * ph,
            b: -ph / bq2,
        };

        let mut theta = Quintet {
            a: -self.f1(u, un)? * pf_n,
            d: -self.f2(u, un)? * ph_n,
            ..Quintet::default()
        };
        let mut theta_bar = Quintet {
            a: -self.h2(u, un)? * pf_n,
            d: -self.h1(u, un)? * ph_n,
            ..Quintet::default()
        };
        for i in 1..=m {
            let ui = ubar[i - 1];
            let pfi = self.prod(Self::f, ui, ubar, 1, m, i)?;
            let phi = self.prod(Self::h, ui, ubar, 1, m, i)?;
            let (f1u, f2u) = (self.f1(u, ui)?, self.f2(u, ui)?);
            let (h2u, h1u) = (self.h2(u, ui)?, self.h1(u, ui)?);
            let ai = self.a(ui)?;
            let inner = [
                (self.f1(ui, un)?, self.h2(ui, un)?),
                (self.f2(ui, un)?, self.h1(ui, un)?),
                (self.f3(ui, un)?, self.h3(ui, un)?),
            ];
            theta.a += f1u * inner[0].0 * pfi + f2u * inner[0].1 * phi;
            theta.d += f1u * inner[1].0 * pfi + f2u * inner[1].1 * phi;
            theta.e += f1u * inner[2].0 * pfi + f2u * inner[2].1 * phi;
            theta.b2 -= f1u * pfi - f2u * ai * phi / bq2;
            theta.b -= f2u * phi / bq2;
            theta_bar.a += h2u * inner[0].0 * pfi + h1u * inner[0].1 * phi;
            theta_bar.d += h2u * inner[1].0 * pfi + h1u * inner[1].1 * phi;
            theta_bar.e += h2u * inner[2].0 * pfi + h1u * inner[2].1 * phi;
            theta_bar.b2 -= h2u * pfi - h1u * ai * phi / bq2;
            theta_bar.b -= h1u * phi / bq2;
        }

        let mut tau = Quintet::default();
        let dn = self.d(un)?;
        for k in 2..=m + 1 {
            let rk = self.r(k - 2);
            tau.a += qs * dn / bq2 * rk * self.prod(Self::f, un, ubar, k, m, 0)?;
            tau.d -= qs * rk * self.prod(Self::h, un, ubar, k, m, 0)?;
        }
        for i in 2..=m {
            let ui = ubar[i - 1];
            let di = self.d(ui)?;
            let ai = self.a(ui)?;
            let (f1i, f2i, f3i) = (self.f1(ui, un)?, self.f2(ui, un)?, self.f3(ui, un)?);
            let (h1i, h2i, h3i) = (self.h1(ui, un)?, self.h2(ui, un)?, self.h3(ui, un)?);
            for k in 2..=i {
                let c = qs * self.r(k - 2);
                let pfk = self.prod(Self::f, ui, ubar, k, m, i)?;
                let phk = self.prod(Self::h, ui, ubar, k, m, i)?;
                tau.a -= c * (di / bq2 * f1i * pfk - h2i * phk);
                tau.d -= c * (di / bq2 * f2i * pfk - h1i * phk);
                tau.e -= c * (di / bq2 * f3i * pfk - h3i * phk);
                tau.b2 += c / bq2 * (di * pfk + ai * phk);
                tau.b -= c / bq2 * phk;
            }
        }
        Ok(AppendixBTerms { gamma, theta, tau, gamma_bar, theta_bar })
    }
}

/// One value per operator label `a, d, e, b₂, b`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Quintet {
    pub a: C64,
    pub d: C64,
    pub e: C64,
    pub b2: C64,
    pub b: C64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppendixBTerms {
    pub gamma: Quintet,
    pub theta: Quintet,
    pub tau: Quintet,
    pub gamma_bar: Quintet,
    pub theta_bar: Quintet,
}

/// Residuals of the ten functional identities, in the order
/// `A, D, E, B₂, B` (unbarred) then `A, D, E, B₂, B` (barred).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppendixBReport {
    pub m: usize,
    pub residuals: [f64; 10],
}

impl AppendixBReport {
    pub const LABELS: [&'static str; 10] = [
        "γa+θa+τa = 0",
        "γd+θd+τd = 0",
        "γe+θe+τe = α^{M+1}",
        "γb2+θb2+τb2 = r_M",
        "θb+τb+α^M = s_M",
        "γ̄a+θ̄a−Q⁻²a(u)τa = 0",
        "γ̄d+θ̄d−Q⁻²a(u)τd = 0",
        "γ̄e+θ̄e−Q⁻²a(u)τe = δ^{M+1}",
        "γ̄b2+θ̄b2−Q⁻²a(u)τb2 = −Q⁻²a(u)r_M",
        "γ̄b+θ̄b−Q⁻²a(u)τb+δ^M = −Q⁻²a(u)s_M",
    ];

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn labelled(&self) -> Vec<(&'static str, f64)> {
        Self::LABELS.iter().copied().zip(self.residuals.iter().copied()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::model::Branch;
    use crate::sampling::Sampler;

    fn ctx(branch: Branch) -> CoefficientContext {
        CoefficientContext::new(ModelParams::new(3, c64(1.1, 0.2), branch).unwrap())
    }

    #[test]
    fn cleared_denominators() {
        let c = ctx(Branch::Plus);
        let q = c.params().q();
        let bq2 = c.big_q2();
        let (u, v) = (c64(0.8, 0.4), c64(-0.6, 1.1));
        let close = |a: C64, b: C64| residual::scalar(a, b) < 1e-13;
        assert!(close(c.y(u).unwrap() + c.d(u).unwrap() / bq2, c64(1.0, 0.0)));
        assert!(close(c.a(u).unwrap() * om(q * u * u), -om(q * q * u * u)));
        assert!(close(c.d(u).unwrap() * om(q * u * u), -om(u * u)));
        assert!(close(c.f(u, v).unwrap() * om(u / v) * om(q * u * v), om(u / (q * v)) * om(u * v)));
        assert!(close(c.h(u, v).unwrap() * om(u / v) * om(q * u * v), om(u * q / v) * om(q * q * u * v)));
        assert!(close(c.f3(u, v).unwrap() * om(q * u * v), -om(u * v)));
        assert!(close((c.f2(u, v).unwrap() + 1.0) * om(q * u * v), -bq2 * om(u * v)));
        assert!(close(
            c.h3(u, v).unwrap() * bq2 * om(q * u * u) * om(q * u * v),
            om(q) * om(q * u / v)
        ));
        let x6 = c.eval_a7(A7::X6, u, v).unwrap();
        assert!((x6 * om(q * u * v) + om(q * u * v) + bq2 * om(u * v)).norm() < 1e-13);
        let y1 = c.eval_a7(A7::Y1, u, v).unwrap();
        let y3 = c.eval_a7(A7::Y3, u, v).unwrap();
        assert!((y1 + y3).norm() < 1e-15);
    }

    #[test]
    fn singular_argument_names_factor() {
        let c = ctx(Branch::Plus);
        let u = c64(0.8, 0.4);
        match c.f(u, u) {
            Err(Error::Singular { function, factor }) => {
                assert_eq!(function, "f");
                assert_eq!(factor, "ω(u/v)");
            }
            other => panic!("expected singular error, got {other:?}"),
        }
        let pole = (c.params().q()).inv().sqrt();
        assert!(matches!(c.d(pole), Err(Error::Singular { factor: "ω(qu²)", .. })));
    }

    #[test]
    fn r_and_s() {
        let c = ctx(Branch::Plus);
        let bq2 = c.big_q2();
        assert_eq!(c.r(0), c64(-1.0, 0.0));
        assert!(residual::scalar(c.r(1), -(bq2 + 1.0) / (bq2 * bq2)) < 1e-15);
        assert!(residual::scalar(c.r(2) / c.r(1), (bq2 + 1.0) / (bq2 * bq2)) < 1e-14);
        assert!(residual::scalar(c.s(1).unwrap(), bq2.inv()) < 1e-15);
        assert!(residual::scalar(c.s(4).unwrap() / c.s(3).unwrap(), -c.r(1)) < 1e-14);
        assert!(c.s(0).is_err());
    }

    #[test]
    fn alpha_delta_single_rapidity() {
        let c = ctx(Branch::Minus);
        let (u, u1) = (c64(0.7, -0.5), c64(1.2, 0.3));
        assert_eq!(c.alpha_m(u, &[u1]).unwrap(), c.f3(u, u1).unwrap());
        assert_eq!(c.delta_m(u, &[u1]).unwrap(), c.h3(u, u1).unwrap());
    }

    #[test]
    fn alpha_two_rapidities_by_hand() {
        // M = 2: α² = f₃(u,u₂)f(u,u₁) + f₁(u,u₁)f₃(u₁,u₂) + f₂(u,u₁)h₃(u₁,u₂).
        let c = ctx(Branch::Plus);
        let (u, u1, u2) = (c64(0.7, -0.5), c64(1.2, 0.3), c64(-0.4, 0.9));
        let by_hand = c.f3(u, u2).unwrap() * c.f(u, u1).unwrap()
            + c.f1(u, u1).unwrap() * c.f3(u1, u2).unwrap()
            + c.f2(u, u1).unwrap() * c.h3(u1, u2).unwrap();
        assert!(residual::scalar(c.alpha_m(u, &[u1, u2]).unwrap(), by_hand) < 1e-14);
        let by_hand_d = c.h3(u, u2).unwrap() * c.h(u, u1).unwrap()
            + c.h1(u, u1).unwrap() * c.h3(u1, u2).unwrap()
            + c.h2(u, u1).unwrap() * c.f3(u1, u2).unwrap();
        assert!(residual::scalar(c.delta_m(u, &[u1, u2]).unwrap(), by_hand_d) < 1e-14);
    }

    #[test]
    fn identity_332_and_control() {
        for branch in [Branch::Plus, Branch::Minus] {
            let c = ctx(branch);
            let mut s = Sampler::new(11);
            for _ in 0..20 {
                let pts = s.regular_points(2, &[], c.params().q());
                let (a, b) = c.check_identity_332(pts[0], pts[1]).unwrap();
                assert!(a < 1e-12 && b < 1e-12, "{a} {b}");
            }
        }
    }

    #[test]
    fn appendix_b_small_m() {
        let c = ctx(Branch::Plus);
        let mut s = Sampler::new(5);
        for m in 0..=3 {
            let pts = s.regular_points(m + 2, &[], c.params().q());
            let rep = c.check_appendix_b(pts[0], &pts[1..]).unwrap();
            assert!(rep.max_residual() < 1e-10, "M={m}: {:?}", rep.labelled());
        }
    }

    #[test]
    fn log_derivatives_match_finite_differences() {
        let c = ctx(Branch::Plus);
        let (u, v) = (c64(0.8, 0.4), c64(-0.6, 1.1));
        let eps = c64(1e-6, 0.0);
        let fd = |g: &dyn Fn(C64) -> C64, x: C64| (g(x + eps) - g(x - eps)) / (eps * 2.0) / g(x);
        let (fu, fv) = c.dlog_f(u, v).unwrap();
        let (hu, hv) = c.dlog_h(u, v).unwrap();
        assert!(residual::scalar(fu, fd(&|x| c.f(x, v).unwrap(), u)) < 1e-8);
        assert!(residual::scalar(fv, fd(&|x| c.f(u, x).unwrap(), v)) < 1e-8);
        assert!(residual::scalar(hu, fd(&|x| c.h(x, v).unwrap(), u)) < 1e-8);
        assert!(residual::scalar(hv, fd(&|x| c.h(u, x).unwrap(), v)) < 1e-8);
        assert!(residual::scalar(c.dlog_lambda1(u), fd(&|x| c.lambda1(x).unwrap(), u)) < 1e-8);
        assert!(residual::scalar(c.dlog_lambda2(u), fd(&|x| c.lambda2(x).unwrap(), u)) < 1e-8);
    }
}
