//! Single- and double-row monodromy matrices, the transfer matrix and the
//! operator identities of the reflection algebra.
//!
//! Operators are stored either as nine dense quantum-space blocks
//! ([`OperatorValuedMatrix`], `N ≤ 6`) or applied matrix-free to vectors in
//! the joint auxiliary ⊗ quantum space ([`MonodromyAction`]). The joint index
//! is `a·3^N + s`.
//!
//! The double-row monodromy is the ordered product
//! `U(u) = R₀N(u)⋯R₀₁(u) · R₁₀(u)⋯R_N0(u)`; each factor acts on the auxiliary
//! space and one site.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use crate::coefficients::CoefficientContext;
use crate::error::{Error, Result};
use crate::lax::{build_p, build_r, r_derivative, swap_spaces};
use crate::model::{build_hamiltonian, om, ModelParams};
use crate::operator::{
    for_each_site_base, quantum_dim, reference_state, site_right_accumulate, site_stride, DenseMatrix, QOperator,
    StateVector, StoragePolicy,
};
use crate::residual;
use crate::C64;

/// Largest chain for which dense operator-valued matrices are built.
pub const DENSE_MAX_SITES: usize = 6;

pub type Block3 = [[C64; 3]; 3];

/// A 9×9 operator on (auxiliary, site) stored as `entries[a][b][m][n]`:
/// auxiliary row/column `a, b`, site row/column `m, n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFactor {
    pub site: usize,
    pub entries: [[Block3; 3]; 3],
}

impl LocalFactor {
    /// `R₀ₖ`: the first tensor factor of `r` is auxiliary.
    pub fn aux_first(site: usize, r: &DenseMatrix) -> Self {
        let mut entries = [[[[C64::zero(); 3]; 3]; 3]; 3];
        for (a, row) in entries.iter_mut().enumerate() {
            for (b, block) in row.iter_mut().enumerate() {
                for (m, line) in block.iter_mut().enumerate() {
                    for (n, e) in line.iter_mut().enumerate() {
                        *e = r[(3 * a + m, 3 * b + n)];
                    }
                }
            }
        }
        Self { site, entries }
    }

    /// `Rₖ₀`: the first tensor factor of `r` is the site.
    pub fn site_first(site: usize, r: &DenseMatrix) -> Self {
        Self::aux_first(site, &swap_spaces(r))
    }
}

fn check_u(u: C64) -> Result<()> {
    if u.is_zero() || !u.is_finite() {
        return Err(Error::InvalidParams(format!("spectral parameter must be nonzero, got {u}")));
    }
    Ok(())
}

/// Factors of `T(u) = R₀N ⋯ R₀₁`, leftmost first.
pub fn single_row_factors(u: C64, params: &ModelParams) -> Result<Vec<LocalFactor>> {
    let r = build_r(u, params)?.matrix;
    Ok((1..=params.sites()).rev().map(|k| LocalFactor::aux_first(k, &r)).collect())
}

/// Factors of `T̂(u) = R₁₀ ⋯ R_N0`, leftmost first.
pub fn hat_factors(u: C64, params: &ModelParams) -> Result<Vec<LocalFactor>> {
    let r = build_r(u, params)?.matrix;
    Ok((1..=params.sites()).map(|k| LocalFactor::site_first(k, &r)).collect())
}

/// Factors of `U(u) = T(u)T̂(u)`, leftmost first.
pub fn double_row_factors(u: C64, params: &ModelParams) -> Result<Vec<LocalFactor>> {
    let mut f = single_row_factors(u, params)?;
    f.extend(hat_factors(u, params)?);
    Ok(f)
}

/// `dF/du` for each factor of [`double_row_factors`].
pub fn double_row_factor_derivatives(u: C64, params: &ModelParams) -> Result<Vec<LocalFactor>> {
    let dr = r_derivative(u, params)?;
    let n = params.sites();
    let mut f: Vec<LocalFactor> = (1..=n).rev().map(|k| LocalFactor::aux_first(k, &dr)).collect();
    f.extend((1..=n).map(|k| LocalFactor::site_first(k, &dr)));
    Ok(f)
}

/// A 3×3 matrix of quantum-space operators.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorValuedMatrix {
    pub u: C64,
    sites: usize,
    entries: Vec<QOperator>,
}

impl OperatorValuedMatrix {
    pub fn identity(u: C64, sites: usize) -> Self {
        let entries = (0..9)
            .map(|i| {
                if i % 4 == 0 {
                    QOperator::identity(sites, StoragePolicy::Dense)
                } else {
                    QOperator::zeros(sites)
                }
            })
            .collect();
        Self { u, sites, entries }
    }

    /// Builds from nine operators in row-major order.
    pub fn from_entries(u: C64, entries: Vec<QOperator>) -> Result<Self> {
        if entries.len() != 9 {
            return Err(Error::Shape(format!("expected 9 entries, got {}", entries.len())));
        }
        let sites = entries[0].sites();
        if entries.iter().any(|e| e.sites() != sites) {
            return Err(Error::Shape("entries act on chains of different length".into()));
        }
        Ok(Self { u, sites, entries })
    }

    /// Ordered product of local factors.
    pub fn from_factors(u: C64, sites: usize, factors: &[LocalFactor]) -> Result<Self> {
        if sites > DENSE_MAX_SITES {
            return Err(Error::DimensionCap {
                operation: "dense monodromy",
                dim: quantum_dim(sites),
                cap: quantum_dim(DENSE_MAX_SITES),
            });
        }
        let dim = quantum_dim(sites);
        let mut cur: Vec<DenseMatrix> =
            (0..9).map(|i| if i % 4 == 0 { DenseMatrix::identity(dim, dim) } else { DenseMatrix::zeros(dim, dim) }).collect();
        let one = C64::new(1.0, 0.0);
        for f in factors {
            let stride = site_stride(sites, f.site);
            let mut next: Vec<DenseMatrix> = (0..9).map(|_| DenseMatrix::zeros(dim, dim)).collect();
            for a in 0..3 {
                for b in 0..3 {
                    for c in 0..3 {
                        site_right_accumulate(&mut next[3 * a + b], &cur[3 * a + c], stride, &f.entries[c][b], one);
                    }
                }
            }
            cur = next;
        }
        let entries = cur.into_iter().map(|m| QOperator::from_dense(sites, m)).collect::<Result<_>>()?;
        Ok(Self { u, sites, entries })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Entry `(a, b)`, 0-based.
    pub fn get(&self, a: usize, b: usize) -> &QOperator {
        &self.entries[3 * a + b]
    }

    pub fn mul(&self, other: &Self) -> Self {
        let entries = (0..9)
            .map(|i| {
                let (a, b) = (i / 3, i % 3);
                let mut acc = self.get(a, 0).mul_op(other.get(0, b));
                for c in 1..3 {
                    acc.axpy(C64::new(1.0, 0.0), &self.get(a, c).mul_op(other.get(c, b)));
                }
                acc
            })
            .collect();
        Self { u: self.u, sites: self.sites, entries }
    }

    /// `Σ_a w_a X_aa`.
    pub fn weighted_trace(&self, w: [C64; 3]) -> QOperator {
        let mut acc = self.get(0, 0).scale(w[0]);
        acc.axpy(w[1], self.get(1, 1));
        acc.axpy(w[2], self.get(2, 2));
        acc
    }

    /// The full `3·3^N`-dimensional matrix with index `a·3^N + s`.
    pub fn to_joint(&self) -> DenseMatrix {
        let d = quantum_dim(self.sites);
        let mut m = DenseMatrix::zeros(3 * d, 3 * d);
        for a in 0..3 {
            for b in 0..3 {
                m.view_mut((a * d, b * d), (d, d)).copy_from(&self.get(a, b).to_dense());
            }
        }
        m
    }

    pub fn residual(&self, other: &Self) -> f64 {
        residual::matrix(&self.to_joint(), &other.to_joint())
    }
}

pub fn build_t(u: C64, params: &ModelParams) -> Result<OperatorValuedMatrix> {
    OperatorValuedMatrix::from_factors(u, params.sites(), &single_row_factors(u, params)?)
}

pub fn build_that(u: C64, params: &ModelParams) -> Result<OperatorValuedMatrix> {
    OperatorValuedMatrix::from_factors(u, params.sites(), &hat_factors(u, params)?)
}

/// `U(u) = T(u)T̂(u)` as nine dense blocks.
pub fn build_u_matrix(u: C64, params: &ModelParams) -> Result<OperatorValuedMatrix> {
    OperatorValuedMatrix::from_factors(u, params.sites(), &double_row_factors(u, params)?)
}

/// Names of the double-row operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Block {
    A,
    B,
    B1,
    B2,
    C,
    C1,
    C2,
    D,
    E,
}

impl Block {
    pub const ALL: [Block; 9] =
        [Block::A, Block::B, Block::B1, Block::B2, Block::C, Block::C1, Block::C2, Block::D, Block::E];
}

/// The operators `A, B, B₁, B₂, C, C₁, C₂, D, E` read off from `U(u)`:
///
/// ```text
///       ⎛ A    B₁     B     ⎞
/// U  =  ⎜ C₁   E + A  B₂    ⎟
///       ⎝ C    C₂     D + yA⎠
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleRowBlocks {
    pub u: C64,
    /// `y(u) = 1 − Q⁻²d(u)`.
    pub y: C64,
    pub a: QOperator,
    pub b: QOperator,
    pub b1: QOperator,
    pub b2: QOperator,
    pub c: QOperator,
    pub c1: QOperator,
    pub c2: QOperator,
    pub d: QOperator,
    pub e: QOperator,
}

impl DoubleRowBlocks {
    pub fn from_matrix(m: &OperatorValuedMatrix, y: C64) -> Self {
        let a = m.get(0, 0).clone();
        let minus = C64::new(-1.0, 0.0);
        Self {
            u: m.u,
            y,
            e: m.get(1, 1).add_scaled(&a, minus),
            d: m.get(2, 2).add_scaled(&a, -y),
            b1: m.get(0, 1).clone(),
            b: m.get(0, 2).clone(),
            c1: m.get(1, 0).clone(),
            b2: m.get(1, 2).clone(),
            c: m.get(2, 0).clone(),
            c2: m.get(2, 1).clone(),
            a,
        }
    }

    pub fn get(&self, block: Block) -> &QOperator {
        match block {
            Block::A => &self.a,
            Block::B => &self.b,
            Block::B1 => &self.b1,
            Block::B2 => &self.b2,
            Block::C => &self.c,
            Block::C1 => &self.c1,
            Block::C2 => &self.c2,
            Block::D => &self.d,
            Block::E => &self.e,
        }
    }

    /// Reassembles `U(u)` from the blocks.
    pub fn reconstruct(&self) -> OperatorValuedMatrix {
        let one = C64::new(1.0, 0.0);
        let entries = vec![
            self.a.clone(),
            self.b1.clone(),
            self.b.clone(),
            self.c1.clone(),
            self.e.add_scaled(&self.a, one),
            self.b2.clone(),
            self.c.clone(),
            self.c2.clone(),
            self.d.add_scaled(&self.a, self.y),
        ];
        OperatorValuedMatrix::from_entries(self.u, entries).expect("nine entries of one chain")
    }
}

/// Double-row blocks at `u`; requires `qu² ≠ ±1`.
pub fn build_u(u: C64, params: &ModelParams) -> Result<DoubleRowBlocks> {
    check_u(u)?;
    let y = CoefficientContext::new(*params).y(u)?;
    Ok(DoubleRowBlocks::from_matrix(&build_u_matrix(u, params)?, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransferMethod {
    /// `tr₀ M₀U₀(u)` with `M = diag(Q⁻², 1, Q²)`.
    #[default]
    Trace,
    /// `a(u)A(u) + Q²D(u) + E(u)`.
    Blocks,
}

fn trace_weights(params: &ModelParams) -> [C64; 3] {
    let bq2 = params.big_q() * params.big_q();
    [bq2.inv(), C64::new(1.0, 0.0), bq2]
}

pub fn transfer_matrix(u: C64, params: &ModelParams, method: TransferMethod) -> Result<QOperator> {
    match method {
        TransferMethod::Trace => {
            check_u(u)?;
            Ok(build_u_matrix(u, params)?.weighted_trace(trace_weights(params)))
        }
        TransferMethod::Blocks => {
            let blocks = build_u(u, params)?;
            let ctx = CoefficientContext::new(*params);
            let bq2 = params.big_q() * params.big_q();
            let mut t = blocks.a.scale(ctx.a(u)?);
            t.axpy(bq2, &blocks.d);
            t.axpy(C64::new(1.0, 0.0), &blocks.e);
            Ok(t)
        }
    }
}

/// `dt/du` by the product rule over all `2N` factors.
pub fn transfer_derivative(u: C64, params: &ModelParams) -> Result<QOperator> {
    check_u(u)?;
    let factors = double_row_factors(u, params)?;
    let derivs = double_row_factor_derivatives(u, params)?;
    let w = trace_weights(params);
    let mut acc = QOperator::zeros(params.sites());
    for k in 0..factors.len() {
        let mut list = factors.clone();
        list[k] = derivs[k].clone();
        let term = OperatorValuedMatrix::from_factors(u, params.sites(), &list)?.weighted_trace(w);
        acc.axpy(C64::new(1.0, 0.0), &term);
    }
    Ok(acc)
}

/// Central difference with one level of Richardson extrapolation.
pub fn transfer_derivative_fd(u: C64, params: &ModelParams, step: f64) -> Result<QOperator> {
    let central = |h: f64| -> Result<QOperator> {
        let hp = transfer_matrix(u + h, params, TransferMethod::Trace)?;
        let hm = transfer_matrix(u - h, params, TransferMethod::Trace)?;
        Ok(hp.add_scaled(&hm, C64::new(-1.0, 0.0)).scale(C64::new(0.5 / h, 0.0)))
    };
    let coarse = central(step)?;
    let fine = central(step / 2.0)?;
    Ok(fine.scale(C64::new(4.0 / 3.0, 0.0)).add_scaled(&coarse, C64::new(-1.0 / 3.0, 0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMethod {
    Analytic,
    FiniteDifference { step: f64 },
}

/// `α = −1/(4ω(q²)ω(q)^{2N−2})` and `β = ω(q)/ω(q²) − (N/2)ω(q²)/ω(q)`.
pub fn hamiltonian_constants(params: &ModelParams) -> Result<(C64, C64)> {
    let q = params.q();
    let (wq, wq2) = (om(q), om(q * q));
    if wq.norm() < 1e-12 {
        return Err(Error::Singular { function: "α, β", factor: "ω(q)" });
    }
    if wq2.norm() < 1e-12 {
        return Err(Error::Singular { function: "α, β", factor: "ω(q²)" });
    }
    let n = params.sites();
    let alpha = -(wq2 * wq.powi(2 * n as i32 - 2) * 4.0).inv();
    let beta = wq / wq2 - wq2 / wq * (n as f64 / 2.0);
    Ok((alpha, beta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianReport {
    pub method: DerivativeMethod,
    pub residual: f64,
    pub tolerance: f64,
}

impl HamiltonianReport {
    pub fn pass(&self) -> bool {
        self.residual < self.tolerance
    }
}

/// Residual of `α t′(1) + β I = H`.
pub fn hamiltonian_from_transfer(params: &ModelParams, method: DerivativeMethod) -> Result<HamiltonianReport> {
    if params.sites() < 2 {
        return Err(Error::OutOfRange { what: "N", value: params.sites(), allowed: "≥ 2".into() });
    }
    let (alpha, beta) = hamiltonian_constants(params)?;
    let one = C64::new(1.0, 0.0);
    let (dt, tolerance) = match method {
        DerivativeMethod::Analytic => (transfer_derivative(one, params)?, params.tol_identity()),
        DerivativeMethod::FiniteDifference { step } => {
            (transfer_derivative_fd(one, params, step)?, params.tol_derivative())
        }
    };
    let lhs = dt.scale(alpha).add_scaled(&QOperator::identity(params.sites(), StoragePolicy::Dense), beta);
    let h = build_hamiltonian(params, StoragePolicy::Dense)?;
    Ok(HamiltonianReport { method, residual: lhs.residual(&h), tolerance })
}

/// Relative distance between the analytic and finite-difference `t′(1)`.
pub fn derivative_agreement(params: &ModelParams, step: f64) -> Result<f64> {
    let one = C64::new(1.0, 0.0);
    Ok(transfer_derivative(one, params)?.residual(&transfer_derivative_fd(one, params, step)?))
}

/// `‖[t(u), t(v)]‖` relative to `‖t(u)t(v)‖`.
pub fn check_commutativity(u: C64, v: C64, params: &ModelParams) -> Result<f64> {
    let tu = transfer_matrix(u, params, TransferMethod::Trace)?;
    let tv = transfer_matrix(v, params, TransferMethod::Trace)?;
    Ok(tu.mul_op(&tv).residual(&tv.mul_op(&tu)))
}

/// Embeds an operator-valued matrix into `aux₁ ⊗ aux₂ ⊗ quantum` acting on
/// auxiliary slot 1 or 2.
fn pair_embed(m: &OperatorValuedMatrix, slot: u8) -> DenseMatrix {
    let d = quantum_dim(m.sites());
    let blocks: Vec<DenseMatrix> = (0..9).map(|i| m.get(i / 3, i % 3).to_dense()).collect();
    let mut out = DenseMatrix::zeros(9 * d, 9 * d);
    for a1 in 0..3 {
        for a2 in 0..3 {
            for b1 in 0..3 {
                for b2 in 0..3 {
                    let block = match slot {
                        1 if a2 == b2 => &blocks[3 * a1 + b1],
                        2 if a1 == b1 => &blocks[3 * a2 + b2],
                        _ => continue,
                    };
                    let (r, c) = ((3 * a1 + a2) * d, (3 * b1 + b2) * d);
                    out.view_mut((r, c), (d, d)).copy_from(block);
                }
            }
        }
    }
    out
}

/// A 9×9 auxiliary-pair matrix tensored with the quantum identity.
fn pair_scalar(r: &DenseMatrix, sites: usize) -> DenseMatrix {
    let d = quantum_dim(sites);
    r.kronecker(&DenseMatrix::identity(d, d))
}

fn regular_pair(u: C64, v: C64) -> Result<()> {
    check_u(u)?;
    check_u(v)
}

/// Residual of `R₁₂(u/v)T₁(u)T₂(v) = T₂(v)T₁(u)R₁₂(u/v)`.
pub fn check_rtt(u: C64, v: C64, params: &ModelParams) -> Result<f64> {
    regular_pair(u, v)?;
    let n = params.sites();
    let (tu, tv) = (build_t(u, params)?, build_t(v, params)?);
    let r = pair_scalar(&build_r(u / v, params)?.matrix, n);
    let t1 = pair_embed(&tu, 1);
    let t2 = pair_embed(&tv, 2);
    let lhs = &r * &t1 * &t2;
    let rhs = t2 * t1 * r;
    Ok(residual::matrix(&lhs, &rhs))
}

/// Residual of the reflection equation
/// `R₁₂(u/v)U₁(u)R₂₁(uv)U₂(v) = U₂(v)R₁₂(uv)U₁(u)R₂₁(u/v)`.
pub fn check_reflection_equation(u: C64, v: C64, params: &ModelParams) -> Result<f64> {
    regular_pair(u, v)?;
    let n = params.sites();
    let (uu, uv) = (build_u_matrix(u, params)?, build_u_matrix(v, params)?);
    let r_ratio = build_r(u / v, params)?;
    let r_prod = build_r(u * v, params)?;
    let u1 = pair_embed(&uu, 1);
    let u2 = pair_embed(&uv, 2);
    let lhs = pair_scalar(&r_ratio.matrix, n) * &u1 * pair_scalar(&r_prod.swapped(), n) * &u2;
    let rhs = u2 * pair_scalar(&r_prod.matrix, n) * u1 * pair_scalar(&r_ratio.swapped(), n);
    Ok(residual::matrix(&lhs, &rhs))
}

/// Which family of exchange relations to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExchangeSide {
    /// `A(u)B(v)`, `D(u)B(v)`, `B(u)B(v)`, `B(u)B₁(v)`, `B(u)E(v)`.
    B,
    /// The mirrored relations for `C`.
    C,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeReport {
    pub side: ExchangeSide,
    pub residuals: [f64; 5],
}

impl ExchangeReport {
    pub fn labels(&self) -> [&'static str; 5] {
        match self.side {
            ExchangeSide::B => ["A(u)B(v)", "D(u)B(v)", "B(u)B(v)", "B(u)B1(v)", "B(u)E(v)"],
            ExchangeSide::C => ["C(v)A(u)", "C(v)D(u)", "C(v)C(u)", "C1(v)C(u)", "E(v)C(u)"],
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Linear combination `Σ c_k X_k Y_k` of operator products.
fn combo(terms: &[(C64, &QOperator, &QOperator)]) -> QOperator {
    let mut it = terms.iter();
    let (c0, x0, y0) = it.next().expect("non-empty combination");
    let mut acc = x0.mul_op(y0).scale(*c0);
    for (c, x, y) in it {
        acc.axpy(*c, &x.mul_op(y));
    }
    acc
}

pub fn check_exchange_relations(u: C64, v: C64, params: &ModelParams, side: ExchangeSide) -> Result<ExchangeReport> {
    let ctx = CoefficientContext::new(*params);
    let (p, w) = (build_u(u, params)?, build_u(v, params)?);
    exchange_relations_with(&p, &w, &ctx, side)
}

/// Exchange relations for precomputed blocks at `u` (`p`) and `v` (`w`).
pub fn exchange_relations_with(
    p: &DoubleRowBlocks,
    w: &DoubleRowBlocks,
    ctx: &CoefficientContext,
    side: ExchangeSide,
) -> Result<ExchangeReport> {
    let (u, v) = (p.u, w.u);
    let one = C64::new(1.0, 0.0);
    let bq2 = ctx.params().big_q() * ctx.params().big_q();
    let (f, f1, f2, f3) = (ctx.f(u, v)?, ctx.f1(u, v)?, ctx.f2(u, v)?, ctx.f3(u, v)?);
    let (h, h1, h2, h3) = (ctx.h(u, v)?, ctx.h1(u, v)?, ctx.h2(u, v)?, ctx.h3(u, v)?);
    let abar = ctx.a(u)? / bq2;
    let res = |l: QOperator, r: QOperator| l.residual(&r);
    let residuals = match side {
        ExchangeSide::B => [
            res(
                p.a.mul_op(&w.b),
                combo(&[(f, &w.b, &p.a), (f1, &p.b, &w.a), (f2, &p.b, &w.d), (f3, &p.b, &w.e), (-one, &p.b1, &w.b2)]),
            ),
            res(
                p.d.mul_op(&w.b),
                combo(&[
                    (h, &w.b, &p.d),
                    (h1, &p.b, &w.d),
                    (h2, &p.b, &w.a),
                    (h3, &p.b, &w.e),
                    (abar, &p.b1, &w.b2),
                    (-bq2.inv(), &p.e, &w.b),
                ]),
            ),
            res(p.b.mul_op(&w.b), w.b.mul_op(&p.b)),
            res(p.b.mul_op(&w.b1), w.b.mul_op(&p.b1)),
            res(p.b.mul_op(&w.e), w.b.mul_op(&p.e)),
        ],
        ExchangeSide::C => [
            res(
                w.c.mul_op(&p.a),
                combo(&[(f, &p.a, &w.c), (f1, &w.a, &p.c), (f2, &w.d, &p.c), (f3, &w.e, &p.c), (-one, &w.c2, &p.c1)]),
            ),
            res(
                w.c.mul_op(&p.d),
                combo(&[
                    (h, &p.d, &w.c),
                    (h1, &w.d, &p.c),
                    (h2, &w.a, &p.c),
                    (h3, &w.e, &p.c),
                    (abar, &w.c2, &p.c1),
                    (-bq2.inv(), &w.c, &p.e),
                ]),
            ),
            res(w.c.mul_op(&p.c), p.c.mul_op(&w.c)),
            res(w.c1.mul_op(&p.c), p.c1.mul_op(&w.c)),
            res(w.e.mul_op(&p.c), p.e.mul_op(&w.c)),
        ],
    };
    Ok(ExchangeReport { side, residuals })
}

/// Coefficients `x₁…x₆, y₁…y₃` of the `C(u)B(v)` relation; public so that
/// tests can perturb them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbCoefficients {
    pub x: [C64; 6],
    pub y: [C64; 3],
}

impl CbCoefficients {
    pub fn new(u: C64, v: C64, ctx: &CoefficientContext) -> Result<Self> {
        use crate::coefficients::A7;
        let mut x = [C64::zero(); 6];
        let mut y = [C64::zero(); 3];
        for (k, name) in A7::ALL.iter().enumerate() {
            let val = ctx.eval_a7(*name, u, v)?;
            if k < 6 {
                x[k] = val;
            } else {
                y[k - 6] = val;
            }
        }
        Ok(Self { x, y })
    }
}

/// Residual of the `C(u₁)B(v₁)` commutation relation.
pub fn check_cb_commutation(u1: C64, v1: C64, params: &ModelParams) -> Result<f64> {
    let ctx = CoefficientContext::new(*params);
    let coeffs = CbCoefficients::new(u1, v1, &ctx)?;
    check_cb_commutation_with(&build_u(u1, params)?, &build_u(v1, params)?, &coeffs)
}

pub fn check_cb_commutation_with(p: &DoubleRowBlocks, w: &DoubleRowBlocks, k: &CbCoefficients) -> Result<f64> {
    let one = C64::new(1.0, 0.0);
    let rhs = combo(&[
        (one, &w.b, &p.c),
        (k.x[0], &p.a, &w.a),
        (k.x[1], &w.a, &p.a),
        (k.x[2], &p.d, &w.a),
        (k.x[3], &p.a, &w.d),
        (k.x[4], &w.a, &p.d),
        (k.x[5], &p.d, &w.d),
        (k.y[0], &w.a, &p.e),
        (k.y[1], &p.e, &w.a),
        (k.y[2], &p.e, &w.d),
        (one, &w.b1, &p.c1),
        (-one, &p.c2, &w.b2),
    ]);
    Ok(p.c.mul_op(&w.b).residual(&rhs))
}

/// Residuals of the reference-state properties of `|0⟩` and `⟨0|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceReport {
    /// Triangularity and diagonal eigenvalues of `T` and `T̂` on `|0⟩`.
    pub single_row: f64,
    /// `A, D, E` eigen-relations and annihilation by `C, C₁, C₂, B₁`.
    pub double_row_right: f64,
    /// The dual relations on `⟨0|`.
    pub double_row_left: f64,
    /// `t(u)|0⟩ = (a(u)Λ₁(u) + d(u)Λ₂(u))|0⟩`.
    pub transfer: f64,
}

impl ReferenceReport {
    pub fn max_residual(&self) -> f64 {
        self.single_row.max(self.double_row_right).max(self.double_row_left).max(self.transfer)
    }
}

fn annihilation(op: &QOperator, v: &StateVector, left: bool) -> f64 {
    let image = if left { op.apply_row(v) } else { op.apply(v) };
    image.norm() / op.frobenius_norm().max(f64::MIN_POSITIVE)
}

pub fn check_reference_state(u: C64, params: &ModelParams) -> Result<ReferenceReport> {
    let n = params.sites() as i32;
    let ctx = CoefficientContext::new(*params);
    let zero = reference_state(params.sites());
    let eig = |op: &QOperator, lambda: C64, left: bool| {
        let image = if left { op.apply_row(&zero) } else { op.apply(&zero) };
        residual::vector(&image, &(&zero * lambda))
    };
    let q = params.q();
    let mut single = 0.0f64;
    for t in [build_t(u, params)?, build_that(u, params)?] {
        for a in 0..3 {
            for b in 0..a {
                single = single.max(annihilation(t.get(a, b), &zero, false));
            }
        }
        single = single.max(eig(t.get(0, 0), om(q * u).powi(n), false));
        single = single.max(annihilation(t.get(1, 1), &zero, false));
        single = single.max(eig(t.get(2, 2), om(u).powi(n), false));
    }
    let blk = build_u(u, params)?;
    let bq2 = params.big_q() * params.big_q();
    let (l1, l2, d) = (ctx.lambda1(u)?, ctx.lambda2(u)?, ctx.d(u)?);
    let mut right = eig(&blk.a, l1, false).max(eig(&blk.d, d * l2 / bq2, false));
    for op in [&blk.e, &blk.c, &blk.c1, &blk.c2, &blk.b1] {
        right = right.max(annihilation(op, &zero, false));
    }
    let mut left = eig(&blk.a, l1, true).max(eig(&blk.d, d * l2 / bq2, true));
    for op in [&blk.e, &blk.b, &blk.b1, &blk.b2, &blk.c1] {
        left = left.max(annihilation(op, &zero, true));
    }
    let t = transfer_matrix(u, params, TransferMethod::Trace)?;
    let transfer = eig(&t, ctx.a(u)? * l1 + d * l2, false);
    Ok(ReferenceReport { single_row: single, double_row_right: right, double_row_left: left, transfer })
}

/// Matrix-free application of `U(u)` in the joint auxiliary ⊗ quantum space.
#[derive(Debug, Clone)]
pub struct MonodromyAction {
    pub u: C64,
    sites: usize,
    factors: Vec<LocalFactor>,
}

impl MonodromyAction {
    pub fn new(u: C64, params: &ModelParams) -> Result<Self> {
        check_u(u)?;
        Ok(Self { u, sites: params.sites(), factors: double_row_factors(u, params)? })
    }

    pub fn from_factors(u: C64, sites: usize, factors: Vec<LocalFactor>) -> Self {
        Self { u, sites, factors }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    fn apply_factor(&self, f: &LocalFactor, v: &[C64], out: &mut [C64], transpose: bool) {
        let d = quantum_dim(self.sites);
        let st = site_stride(self.sites, f.site);
        for_each_site_base(d, st, |base| {
            let mut input = [C64::zero(); 9];
            for a in 0..3 {
                for m in 0..3 {
                    input[3 * a + m] = v[a * d + base + m * st];
                }
            }
            for ap in 0..3 {
                for mp in 0..3 {
                    let mut acc = C64::zero();
                    for a in 0..3 {
                        for m in 0..3 {
                            let coef =
                                if transpose { f.entries[a][ap][m][mp] } else { f.entries[ap][a][mp][m] };
                            acc += coef * input[3 * a + m];
                        }
                    }
                    out[ap * d + base + mp * st] = acc;
                }
            }
        });
    }

    fn run(&self, mut v: Vec<C64>, transpose: bool) -> [StateVector; 3] {
        let mut out = vec![C64::zero(); v.len()];
        if transpose {
            for f in &self.factors {
                self.apply_factor(f, &v, &mut out, true);
                core::mem::swap(&mut v, &mut out);
            }
        } else {
            for f in self.factors.iter().rev() {
                self.apply_factor(f, &v, &mut out, false);
                core::mem::swap(&mut v, &mut out);
            }
        }
        let d = quantum_dim(self.sites);
        [0, 1, 2].map(|a| StateVector::from_column_slice(&v[a * d..(a + 1) * d]))
    }

    /// `[U₀ᵦψ, U₁ᵦψ, U₂ᵦψ]` (0-based column `b`).
    pub fn column(&self, b: usize, psi: &StateVector) -> [StateVector; 3] {
        let d = quantum_dim(self.sites);
        let mut v = vec![C64::zero(); 3 * d];
        v[b * d..(b + 1) * d].copy_from_slice(psi.as_slice());
        self.run(v, false)
    }

    /// `[φᵀU_a0, φᵀU_a1, φᵀU_a2]` as column vectors, without conjugation.
    pub fn row(&self, a: usize, phi: &StateVector) -> [StateVector; 3] {
        let d = quantum_dim(self.sites);
        let mut v = vec![C64::zero(); 3 * d];
        v[a * d..(a + 1) * d].copy_from_slice(phi.as_slice());
        self.run(v, true)
    }
}

/// Applies a double-row operator to a vector (or, with `left`, a row vector)
/// without forming any matrix.
#[derive(Debug, Clone)]
pub struct BlockAction {
    mono: MonodromyAction,
    y: C64,
}

impl BlockAction {
    pub fn new(u: C64, params: &ModelParams) -> Result<Self> {
        let y = CoefficientContext::new(*params).y(u)?;
        Ok(Self { mono: MonodromyAction::new(u, params)?, y })
    }

    pub fn u(&self) -> C64 {
        self.mono.u
    }

    /// `X ψ`.
    pub fn apply(&self, block: Block, psi: &StateVector) -> StateVector {
        let pick = |a: usize, b: usize| self.mono.column(b, psi)[a].clone();
        match block {
            Block::A => pick(0, 0),
            Block::B1 => pick(0, 1),
            Block::B => pick(0, 2),
            Block::C1 => pick(1, 0),
            Block::B2 => pick(1, 2),
            Block::C => pick(2, 0),
            Block::C2 => pick(2, 1),
            Block::E => {
                let col0 = self.mono.column(0, psi);
                self.mono.column(1, psi)[1].clone() - &col0[0]
            }
            Block::D => {
                let col0 = self.mono.column(0, psi);
                self.mono.column(2, psi)[2].clone() - &col0[0] * self.y
            }
        }
    }

    /// `φᵀ X`, returned as a column.
    pub fn apply_left(&self, block: Block, phi: &StateVector) -> StateVector {
        let pick = |a: usize, b: usize| self.mono.row(a, phi)[b].clone();
        match block {
            Block::A => pick(0, 0),
            Block::B1 => pick(0, 1),
            Block::B => pick(0, 2),
            Block::C1 => pick(1, 0),
            Block::B2 => pick(1, 2),
            Block::C => pick(2, 0),
            Block::C2 => pick(2, 1),
            Block::E => {
                let row0 = self.mono.row(0, phi);
                self.mono.row(1, phi)[1].clone() - &row0[0]
            }
            Block::D => {
                let row0 = self.mono.row(0, phi);
                self.mono.row(2, phi)[2].clone() - &row0[0] * self.y
            }
        }
    }

    /// `t(u)ψ = Q⁻²U₁₁ψ + U₂₂ψ + Q²U₃₃ψ`.
    pub fn transfer(&self, psi: &StateVector, params: &ModelParams) -> StateVector {
        let w = trace_weights(params);
        let mut out = self.mono.column(0, psi)[0].clone() * w[0];
        out += self.mono.column(1, psi)[1].clone() * w[1];
        out += self.mono.column(2, psi)[2].clone() * w[2];
        out
    }

    /// `φᵀ t(u)`.
    pub fn transfer_left(&self, phi: &StateVector, params: &ModelParams) -> StateVector {
        let w = trace_weights(params);
        let mut out = self.mono.row(0, phi)[0].clone() * w[0];
        out += self.mono.row(1, phi)[1].clone() * w[1];
        out += self.mono.row(2, phi)[2].clone() * w[2];
        out
    }

    /// Squared Frobenius norm of a block, from its columns.
    pub fn frobenius_norm(&self, block: Block) -> f64 {
        let d = quantum_dim(self.mono.sites);
        let mut acc = 0.0;
        for s in 0..d {
            let mut e = StateVector::zeros(d);
            e[s] = C64::new(1.0, 0.0);
            acc += self.apply(block, &e).norm_squared();
        }
        acc.sqrt()
    }
}

/// Largest chain for which `t(u)` is assembled densely from the
/// matrix-free action (for exact diagonalization).
pub const ED_MAX_SITES: usize = 7;

/// `t(u)` as a dense matrix, built column by column from [`BlockAction`].
/// Works up to [`ED_MAX_SITES`], beyond the dense-monodromy cap.
pub fn transfer_matrix_columns(u: C64, params: &ModelParams) -> Result<QOperator> {
    let n = params.sites();
    if n > ED_MAX_SITES {
        return Err(Error::DimensionCap {
            operation: "dense transfer matrix",
            dim: quantum_dim(n),
            cap: quantum_dim(ED_MAX_SITES),
        });
    }
    let act = BlockAction::new(u, params)?;
    let d = quantum_dim(n);
    let mut m = DenseMatrix::zeros(d, d);
    let mut e = StateVector::zeros(d);
    for s in 0..d {
        e[s] = C64::new(1.0, 0.0);
        m.set_column(s, &act.transfer(&e, params));
        e[s] = C64::zero();
    }
    QOperator::from_dense(n, m)
}

/// The 9×9 permutation embedded in the auxiliary pair, exposed for tests.
pub fn aux_pair_permutation(sites: usize) -> DenseMatrix {
    pair_scalar(&build_p(), sites)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::model::Branch;

    fn params(n: usize) -> ModelParams {
        ModelParams::new(n, c64(1.1, 0.2), Branch::Plus).unwrap()
    }

    #[test]
    fn single_site_monodromy_is_r() {
        let p = params(1);
        let u = c64(0.8, 0.3);
        let r = build_r(u, &p).unwrap().matrix;
        let t = build_t(u, &p).unwrap();
        assert!(residual::matrix(&t.to_joint(), &r) < 1e-15);
        let th = build_that(u, &p).unwrap();
        assert!(residual::matrix(&th.to_joint(), &swap_spaces(&r)) < 1e-15);
    }

    #[test]
    fn regular_point_is_permutation() {
        let p = params(2);
        let t = build_t(c64(1.0, 0.0), &p).unwrap();
        // Each factor is ω(q)P₀ᵢ; T(1) has a single nonzero per row of the joint matrix.
        let j = t.to_joint();
        let scale = om(p.q()).powi(2);
        for r in 0..j.nrows() {
            let nz: Vec<C64> = j.row(r).iter().copied().filter(|z| z.norm() > 1e-12).collect();
            assert_eq!(nz.len(), 1);
            assert!((nz[0] - scale).norm() < 1e-12 * scale.norm());
        }
    }

    #[test]
    fn blocks_reconstruct() {
        let p = params(2);
        let u = c64(0.9, -0.4);
        let blocks = build_u(u, &p).unwrap();
        let full = build_u_matrix(u, &p).unwrap();
        assert!(blocks.reconstruct().residual(&full) < 1e-14);
    }

    #[test]
    fn transfer_methods_agree() {
        let p = params(3);
        let u = c64(0.7, 0.6);
        let a = transfer_matrix(u, &p, TransferMethod::Trace).unwrap();
        let b = transfer_matrix(u, &p, TransferMethod::Blocks).unwrap();
        assert!(a.residual(&b) < 1e-13);
    }

    #[test]
    fn matrix_free_matches_dense() {
        let p = params(2);
        let u = c64(0.75, 0.45);
        let blocks = build_u(u, &p).unwrap();
        let act = BlockAction::new(u, &p).unwrap();
        let psi = StateVector::from_fn(9, |i, _| c64(1.0 + i as f64, 0.5 - i as f64 * 0.1));
        for b in Block::ALL {
            let dense = blocks.get(b);
            assert!(residual::vector(&act.apply(b, &psi), &dense.apply(&psi)) < 1e-13, "{b:?}");
            assert!(residual::vector(&act.apply_left(b, &psi), &dense.apply_row(&psi)) < 1e-13, "{b:?}");
            let fro = act.frobenius_norm(b);
            assert!((fro - dense.frobenius_norm()).abs() < 1e-12 * fro.max(1.0));
        }
        let t = transfer_matrix(u, &p, TransferMethod::Trace).unwrap();
        assert!(residual::vector(&act.transfer(&psi, &p), &t.apply(&psi)) < 1e-13);
        assert!(residual::vector(&act.transfer_left(&psi, &p), &t.apply_row(&psi)) < 1e-13);
        assert!(transfer_matrix_columns(u, &p).unwrap().residual(&t) < 1e-14);
    }

    #[test]
    fn rtt_and_reflection_small() {
        let p = params(2);
        let (u, v) = (c64(0.8, 0.5), c64(-1.1, 0.4));
        assert!(check_rtt(u, v, &p).unwrap() < 1e-12);
        assert!(check_rtt(u, u, &p).unwrap() < 1e-12);
        assert!(check_reflection_equation(u, v, &p).unwrap() < 1e-12);
        assert!(check_reflection_equation(u, u, &p).unwrap() < 1e-12);
    }

    #[test]
    fn hamiltonian_and_derivative() {
        let p = params(2);
        let r = hamiltonian_from_transfer(&p, DerivativeMethod::Analytic).unwrap();
        assert!(r.residual < 1e-12, "{r:?}");
        let fd = hamiltonian_from_transfer(&p, DerivativeMethod::FiniteDifference { step: 1e-3 }).unwrap();
        assert!(fd.pass(), "{fd:?}");
    }

    #[test]
    fn exchange_and_reference() {
        let p = params(2);
        let (u, v) = (c64(0.8, 0.5), c64(-1.1, 0.4));
        for side in [ExchangeSide::B, ExchangeSide::C] {
            let r = check_exchange_relations(u, v, &p, side).unwrap();
            assert!(r.max_residual() < 1e-11, "{side:?}: {:?}", r.residuals);
        }
        assert!(check_cb_commutation(u, v, &p).unwrap() < 1e-11);
        assert!(check_reference_state(u, &p).unwrap().max_residual() < 1e-13);
    }

    #[test]
    fn dense_cap() {
        let p = params(7);
        assert!(matches!(build_u_matrix(c64(0.9, 0.1), &p), Err(Error::DimensionCap { .. })));
    }
}
