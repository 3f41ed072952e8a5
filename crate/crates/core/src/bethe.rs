//! Bethe vectors, the off-shell equations, the operator form of the
//! `A`/`D` actions on strings of `B`s (and their duals), and a multi-start
//! Newton solver for the Bethe equations.
//!
//! The dual identities are generated from the `B`-side ones by the
//! order-reversing map `B → C`, `B₁ → C₁`, `B₂ → C₂`, `A, D, E` fixed, which
//! sends every exchange relation of the `B` family to its `C` counterpart.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use crate::coefficients::CoefficientContext;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{om, ModelParams};
use crate::monodromy::{build_u, transfer_matrix_columns, Block, BlockAction, DoubleRowBlocks, DENSE_MAX_SITES};
use crate::operator::{quantum_dim, reference_state, weight_sectors, DenseMatrix, QOperator, StateVector};
use crate::sampling::Sampler;
use crate::C64;

/// Minimum `|ω(·)|` allowed for the factors guarded by [`RapiditySet`].
pub const RAPIDITY_GUARD: f64 = 1e-6;

/// Default acceptance threshold on the normalized Bethe residual.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

/// Bethe vectors whose norm falls below this fraction of the natural scale
/// are reported as collapsed.
pub const COLLAPSE_THRESHOLD: f64 = 1e-12;

/// Default seed modulus range for the solver.
pub const SEED_ANNULUS: (f64, f64) = (0.7, 1.4);

pub const DEFAULT_SEEDS: usize = 200;

/// Probe points at which eigenvalue functions are compared.
pub const PROBES: [C64; 3] = [C64::new(0.93, 0.31), C64::new(1.17, -0.42), C64::new(-0.71, 0.86)];

/// Two solutions are the same state when their eigenvalues agree at every
/// probe to this relative tolerance.
pub const DEDUP_TOLERANCE: f64 = 1e-8;

fn rel(lhs: &StateVector, rhs: &StateVector) -> f64 {
    let scale = lhs.norm().max(rhs.norm());
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).norm() / scale
    }
}

/// An ordered list of rapidities `ū = {u₁, …, u_M}` away from the poles of
/// the coefficient functions.
#[derive(Debug, Clone, PartialEq)]
pub struct RapiditySet {
    values: Vec<C64>,
}

impl RapiditySet {
    /// Validates `u ∉ {0, ±1}`, `ω(qu²) ≠ 0` and, for every pair,
    /// `ω(uᵢ/uⱼ), ω(uᵢuⱼ), ω(quᵢuⱼ) ≠ 0`, each to [`RAPIDITY_GUARD`].
    pub fn new(values: Vec<C64>, params: &ModelParams) -> Result<Self> {
        let q = params.q();
        for (i, &u) in values.iter().enumerate() {
            if u.is_zero() || !u.is_finite() {
                return Err(Error::InvalidParams(format!("rapidity u{} = {u} must be nonzero and finite", i + 1)));
            }
            if om(u).norm() < RAPIDITY_GUARD {
                return Err(Error::Singular { function: "rapidity set", factor: "ω(u)" });
            }
            if om(q * u * u).norm() < RAPIDITY_GUARD {
                return Err(Error::Singular { function: "rapidity set", factor: "ω(qu²)" });
            }
            for &v in &values[i + 1..] {
                if om(u / v).norm() < RAPIDITY_GUARD {
                    return Err(Error::Singular { function: "rapidity set", factor: "ω(uᵢ/uⱼ)" });
                }
                if om(u * v).norm() < RAPIDITY_GUARD {
                    return Err(Error::Singular { function: "rapidity set", factor: "ω(uᵢuⱼ)" });
                }
                if om(q * u * v).norm() < RAPIDITY_GUARD {
                    return Err(Error::Singular { function: "rapidity set", factor: "ω(quᵢuⱼ)" });
                }
            }
        }
        Ok(Self { values })
    }

    pub fn empty() -> Self {
        Self { values: Vec::new() }
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `ū_i`, the set with the `i`-th (0-based) entry removed.
    pub fn without(&self, i: usize) -> Vec<C64> {
        let mut v = self.values.clone();
        v.remove(i);
        v
    }

    /// `{u, ū_i}`: `u` put in place of the `i`-th entry. Since the `B`s (and
    /// the `C`s) commute, the position does not matter.
    pub fn replaced(&self, i: usize, u: C64) -> Vec<C64> {
        let mut v = self.values.clone();
        v[i] = u;
        v
    }
}

/// Right (`|ū⟩`) or left (`⟨ū|`) vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Right,
    Left,
}

fn actions(us: &[C64], params: &ModelParams) -> Result<Vec<BlockAction>> {
    us.iter().map(|&u| BlockAction::new(u, params)).collect()
}

/// `B(u₁)⋯B(u_M)|0⟩`, applied matrix-free.
pub fn bethe_vector(ubar: &[C64], params: &ModelParams) -> Result<StateVector> {
    let mut v = reference_state(params.sites());
    for act in actions(ubar, params)?.iter().rev() {
        v = act.apply(Block::B, &v);
    }
    Ok(v)
}

/// `⟨0|C(u_M)⋯C(u₁)` as a column of components (no conjugation).
pub fn dual_bethe_vector(ubar: &[C64], params: &ModelParams) -> Result<StateVector> {
    let mut v = reference_state(params.sites());
    for act in actions(ubar, params)?.iter().rev() {
        v = act.apply_left(Block::C, &v);
    }
    Ok(v)
}

fn products(ctx: &CoefficientContext, u: C64, others: &[C64]) -> Result<(C64, C64)> {
    let mut pf = C64::new(1.0, 0.0);
    let mut ph = C64::new(1.0, 0.0);
    for &v in others {
        pf *= ctx.f(u, v)?;
        ph *= ctx.h(u, v)?;
    }
    Ok((pf, ph))
}

/// `Λ(u, ū) = a(u)Λ₁(u)Πf(u, uᵢ) + d(u)Λ₂(u)Πh(u, uᵢ)`.
pub fn eigenvalue(u: C64, ubar: &[C64], ctx: &CoefficientContext) -> Result<C64> {
    let (pf, ph) = products(ctx, u, ubar)?;
    Ok(ctx.a(u)? * ctx.lambda1(u)? * pf + ctx.d(u)? * ctx.lambda2(u)? * ph)
}

/// The two halves `(Λ₁(uᵢ)Π_{j≠i}f, Λ₂(uᵢ)Π_{j≠i}h)` of the `i`-th Bethe
/// equation (0-based).
pub fn bethe_terms(i: usize, ubar: &[C64], ctx: &CoefficientContext) -> Result<(C64, C64)> {
    let ui = ubar[i];
    let others: Vec<C64> = ubar.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect();
    let (pf, ph) = products(ctx, ui, &others)?;
    Ok((ctx.lambda1(ui)? * pf, ctx.lambda2(ui)? * ph))
}

/// `E(uᵢ, ūᵢ)`.
pub fn bethe_residual(i: usize, ubar: &[C64], ctx: &CoefficientContext) -> Result<C64> {
    let (l, r) = bethe_terms(i, ubar, ctx)?;
    Ok(l - r)
}

/// `|E(uᵢ, ūᵢ)| / max(|Λ₁Πf|, |Λ₂Πh|)` for every root.
pub fn normalized_residuals(ubar: &[C64], ctx: &CoefficientContext) -> Result<Vec<f64>> {
    (0..ubar.len())
        .map(|i| {
            let (l, r) = bethe_terms(i, ubar, ctx)?;
            let scale = l.norm().max(r.norm());
            Ok(if scale == 0.0 { 0.0 } else { (l - r).norm() / scale })
        })
        .collect()
}

/// Relative residual of the off-shell equation
/// `t(u)|ū⟩ = Λ(u, ū)|ū⟩ + Σᵢ H(u, uᵢ)E(uᵢ, ūᵢ)|{u, ūᵢ}⟩`, or of its left
/// mirror.
pub fn offshell_residual(u: C64, ubar: &RapiditySet, params: &ModelParams, side: Side) -> Result<f64> {
    let ctx = CoefficientContext::new(*params);
    let vec_of = |us: &[C64]| match side {
        Side::Right => bethe_vector(us, params),
        Side::Left => dual_bethe_vector(us, params),
    };
    let psi = vec_of(ubar.values())?;
    let act = BlockAction::new(u, params)?;
    let lhs = match side {
        Side::Right => act.transfer(&psi, params),
        Side::Left => act.transfer_left(&psi, params),
    };
    let mut rhs = &psi * eigenvalue(u, ubar.values(), &ctx)?;
    for i in 0..ubar.len() {
        let coef = ctx.big_h(u, ubar.values()[i])? * bethe_residual(i, ubar.values(), &ctx)?;
        rhs += vec_of(&ubar.replaced(i, u))? * coef;
    }
    Ok(rel(&lhs, &rhs))
}

/// Which operator identity to assemble: the action of `A(u)` or `D(u)` on
/// `B(u₁)⋯B(u_M)` from the left, or on `C(u_M)⋯C(u₁)` from the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Proposition {
    RightA,
    RightD,
    LeftA,
    LeftD,
}

impl Proposition {
    pub const ALL: [Proposition; 4] =
        [Proposition::RightA, Proposition::RightD, Proposition::LeftA, Proposition::LeftD];

    fn is_dual(self) -> bool {
        matches!(self, Proposition::LeftA | Proposition::LeftD)
    }

    fn is_a(self) -> bool {
        matches!(self, Proposition::RightA | Proposition::LeftA)
    }
}

/// A product of double-row operators, written in `B`-side order.
type Word = Vec<(Block, usize)>;

fn mirror(block: Block) -> Block {
    match block {
        Block::B => Block::C,
        Block::B1 => Block::C1,
        Block::B2 => Block::C2,
        other => other,
    }
}

/// Both sides of the `A`- or `D`-action identity as words over the
/// rapidities `[u, u₁, …, u_M]` (index 0 is `u`).
fn action_terms(prop: Proposition, ubar: &[C64], u: C64, ctx: &CoefficientContext) -> Result<(Word, Vec<(C64, Word)>)> {
    let m = ubar.len();
    let u0: Vec<C64> = core::iter::once(u).chain(ubar.iter().copied()).collect();
    let bq2 = ctx.params().big_q() * ctx.params().big_q();
    let qsum = ctx.params().q() + ctx.params().q().inv();
    let prod = |g: fn(&CoefficientContext, C64, C64) -> Result<C64>, i: usize, from: usize| -> Result<C64> {
        let mut p = C64::new(1.0, 0.0);
        for j in from..=m {
            if j != i {
                p *= g(ctx, u0[i], u0[j])?;
            }
        }
        Ok(p)
    };
    let bm: Word = (1..=m).map(|j| (Block::B, j)).collect();
    let b_i = |i: usize| -> Word {
        core::iter::once((Block::B, 0)).chain((1..=m).filter(|&j| j != i).map(|j| (Block::B, j))).collect()
    };
    let with = |mut w: Word, b: Block, j: usize| {
        w.push((b, j));
        w
    };
    let b_bar = |i: usize| -> Word {
        let mut w: Word = (0..i).map(|j| (Block::B, j)).collect();
        w.push((Block::B1, i));
        w.push((Block::B2, i + 1));
        w.extend((i + 2..=m).map(|j| (Block::B, j)));
        w
    };
    let b_tilde = |i: usize| -> Word {
        let mut w: Word = (0..i).map(|j| (Block::B, j)).collect();
        w.push((Block::E, i));
        w.extend((i + 1..=m).map(|j| (Block::B, j)));
        w
    };

    let mut terms: Vec<(C64, Word)> = Vec::new();
    let (lhs, tail) = if prop.is_a() {
        terms.push((prod(CoefficientContext::f, 0, 1)?, with(bm.clone(), Block::A, 0)));
        for i in 1..=m {
            terms.push((ctx.f1(u, u0[i])? * prod(CoefficientContext::f, i, 1)?, with(b_i(i), Block::A, i)));
            terms.push((ctx.f2(u, u0[i])? * prod(CoefficientContext::h, i, 1)?, with(b_i(i), Block::D, i)));
        }
        if m > 0 {
            terms.push((ctx.alpha_m(u, ubar)?, b_tilde(m)));
        }
        let mut lhs = vec![(Block::A, 0)];
        lhs.extend(bm.iter().copied());
        (lhs, C64::new(1.0, 0.0))
    } else {
        terms.push((prod(CoefficientContext::h, 0, 1)?, with(bm.clone(), Block::D, 0)));
        for i in 1..=m {
            terms.push((ctx.h2(u, u0[i])? * prod(CoefficientContext::f, i, 1)?, with(b_i(i), Block::A, i)));
            terms.push((ctx.h1(u, u0[i])? * prod(CoefficientContext::h, i, 1)?, with(b_i(i), Block::D, i)));
        }
        if m > 0 {
            terms.push((ctx.delta_m(u, ubar)?, b_tilde(m)));
        }
        let mut e_bm = vec![(Block::E, 0)];
        e_bm.extend(bm.iter().copied());
        terms.push((-bq2.inv(), e_bm));
        let mut lhs = vec![(Block::D, 0)];
        lhs.extend(bm.iter().copied());
        (lhs, -ctx.a(u)? / bq2)
    };
    for i in 2..=m {
        let di = ctx.d(u0[i])?;
        for k in 2..=i {
            let rk = ctx.r(k - 2) * qsum * tail;
            terms.push((rk * (-di / bq2) * prod(CoefficientContext::f, i, k)?, with(b_i(i), Block::A, i)));
            terms.push((rk * prod(CoefficientContext::h, i, k)?, with(b_i(i), Block::D, i)));
        }
    }
    for i in 0..m {
        terms.push((tail * ctx.r(i), b_bar(i)));
    }
    for i in 1..m {
        terms.push((tail * ctx.s(i)?, b_tilde(i)));
    }
    Ok((lhs, terms))
}

fn evaluate_word(word: &Word, blocks: &[DoubleRowBlocks], dual: bool, sites: usize) -> QOperator {
    let ops: Vec<&QOperator> = if dual {
        word.iter().rev().map(|&(b, j)| blocks[j].get(mirror(b))).collect()
    } else {
        word.iter().map(|&(b, j)| blocks[j].get(b)).collect()
    };
    QOperator::product(sites, ops)
}

/// Relative residual of the full operator identity for the chosen action,
/// including every unwanted term. Dense, so limited to small chains.
pub fn check_proposition(u: C64, ubar: &RapiditySet, params: &ModelParams, which: Proposition) -> Result<f64> {
    if params.sites() > DENSE_MAX_SITES {
        return Err(Error::DimensionCap {
            operation: "operator identity",
            dim: quantum_dim(params.sites()),
            cap: quantum_dim(DENSE_MAX_SITES),
        });
    }
    let ctx = CoefficientContext::new(*params);
    let (lhs, terms) = action_terms(which, ubar.values(), u, &ctx)?;
    let blocks: Vec<DoubleRowBlocks> = core::iter::once(u)
        .chain(ubar.values().iter().copied())
        .map(|w| build_u(w, params))
        .collect::<Result<_>>()?;
    let n = params.sites();
    let dual = which.is_dual();
    let left = evaluate_word(&lhs, &blocks, dual, n);
    let mut right = QOperator::zeros(n);
    for (c, w) in &terms {
        right.axpy(*c, &evaluate_word(w, &blocks, dual, n));
    }
    Ok(left.residual(&right))
}

/// Closed-form one-magnon roots: `ω(qu)^{2N} = ω(u)^{2N}` is solved by
/// `u² = (q⁻¹ − ζ)/(q − ζ)` for each `2N`-th root of unity `ζ ≠ ±1`.
/// Returns both signs of `u` for each `ζ`.
pub fn one_magnon_roots(params: &ModelParams) -> Vec<C64> {
    let n = params.sites();
    let q = params.q();
    let mut roots = Vec::new();
    for k in 1..2 * n {
        if k == n {
            continue;
        }
        let zeta = C64::from_polar(1.0, core::f64::consts::PI * k as f64 / n as f64);
        let u = ((q.inv() - zeta) / (q - zeta)).sqrt();
        roots.push(u);
        roots.push(-u);
    }
    roots
}

/// How a single Newton run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum SeedOutcome {
    Converged { roots: Vec<C64>, iterations: usize, residual: f64 },
    /// The iterate ran into a guard of [`RapiditySet`], typically a
    /// singular zero of the Bethe equations such as `qu² = 1`.
    Singular { iterations: usize, at: Vec<C64> },
    /// A rapidity ran off towards `0` or `∞`.
    Diverged { iterations: usize },
    /// Singular Jacobian or no decrease along the Newton direction.
    Stalled { iterations: usize, residual: f64, at: Vec<C64> },
    MaxIterations { residual: f64 },
}

/// Solver configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub seeds: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub annulus: (f64, f64),
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { seeds: DEFAULT_SEEDS, tolerance: SOLVER_TOLERANCE, max_iterations: 200, annulus: SEED_ANNULUS }
    }
}

/// Starting points for every seed, drawn from one ChaCha stream so that the
/// list depends only on the model seed.
pub fn seed_points(m: usize, params: &ModelParams, opts: &SolverOptions) -> Vec<Vec<C64>> {
    let mut s = Sampler::with_annulus(params.rng_seed(), opts.annulus.0, opts.annulus.1).margin(RAPIDITY_GUARD);
    (0..opts.seeds).map(|_| s.regular_points(m, &[], params.q())).collect()
}

/// Ratio form of the Bethe equations and its Jacobian. Row `i` is
/// `1 − Λ₂Πh/Λ₁Πf` or `1 − Λ₁Πf/Λ₂Πh`, whichever ratio is smaller in
/// modulus, so `|rᵢ|` equals the normalized residual.
fn ratio_system(ubar: &[C64], ctx: &CoefficientContext) -> Result<(Vec<C64>, DenseMatrix)> {
    let m = ubar.len();
    let mut r = vec![C64::zero(); m];
    let mut jac = DenseMatrix::zeros(m, m);
    for i in 0..m {
        let (l, rr) = bethe_terms(i, ubar, ctx)?;
        if l.is_zero() && rr.is_zero() {
            return Err(Error::Singular { function: "Bethe ratio", factor: "Λ₁Πf and Λ₂Πh" });
        }
        // ∂ log(Λ₂Πh / Λ₁Πf) with respect to each root.
        let ui = ubar[i];
        let mut grad = vec![C64::zero(); m];
        grad[i] = ctx.dlog_lambda2(ui) - ctx.dlog_lambda1(ui);
        for k in (0..m).filter(|&k| k != i) {
            let (fu, fv) = ctx.dlog_f(ui, ubar[k])?;
            let (hu, hv) = ctx.dlog_h(ui, ubar[k])?;
            grad[i] += hu - fu;
            grad[k] = hv - fv;
        }
        let (rho, sign) = if rr.norm() <= l.norm() { (rr / l, 1.0) } else { (l / rr, -1.0) };
        r[i] = C64::new(1.0, 0.0) - rho;
        for k in 0..m {
            jac[(i, k)] = -rho * grad[k] * sign;
        }
    }
    Ok((r, jac))
}

fn l2_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest relative change of a rapidity in one Newton step.
const MAX_RELATIVE_STEP: f64 = 0.25;

/// Rapidities outside this modulus range count as diverged.
const DIVERGENCE_RANGE: (f64, f64) = (1e-4, 1e4);

/// Damped Newton iteration from one starting point on the ratio form, with
/// backtracking on its Euclidean norm.
pub fn newton(start: &[C64], params: &ModelParams, opts: &SolverOptions) -> SeedOutcome {
    let ctx = CoefficientContext::new(*params);
    let mut x = start.to_vec();
    if RapiditySet::new(x.clone(), params).is_err() {
        return SeedOutcome::Singular { iterations: 0, at: x };
    }
    let mut res = f64::INFINITY;
    for it in 0..opts.max_iterations {
        let (r, jac) = match ratio_system(&x, &ctx) {
            Ok(s) => s,
            Err(_) => return SeedOutcome::Singular { iterations: it, at: x },
        };
        res = max_norm(&r);
        if res < opts.tolerance * 1e-2 {
            return SeedOutcome::Converged { roots: x, iterations: it, residual: res };
        }
        let rhs = StateVector::from_vec(r.iter().map(|z| -z).collect());
        let step = match linalg::solve(&jac, &rhs) {
            Some(s) if s.iter().all(|z| z.is_finite()) => s,
            _ => return SeedOutcome::Stalled { iterations: it, residual: res, at: x },
        };
        let base = l2_norm(&r);
        // Trust-region style cap on the relative move of any rapidity.
        let reach = x.iter().zip(step.iter()).map(|(u, d)| d.norm() / u.norm()).fold(0.0, f64::max);
        let mut lambda = if reach > MAX_RELATIVE_STEP { MAX_RELATIVE_STEP / reach } else { 1.0 };
        let mut blocked = false;
        let mut next = None;
        for _ in 0..30 {
            let trial: Vec<C64> = x.iter().zip(step.iter()).map(|(a, s)| a + s * lambda).collect();
            if RapiditySet::new(trial.clone(), params).is_err() {
                blocked = true;
            } else if let Ok((rt, _)) = ratio_system(&trial, &ctx) {
                if l2_norm(&rt) < base {
                    next = Some(trial);
                    break;
                }
            }
            lambda *= 0.5;
        }
        match next {
            Some(t) => x = t,
            None if blocked => return SeedOutcome::Singular { iterations: it, at: x },
            None => return SeedOutcome::Stalled { iterations: it, residual: res, at: x },
        }
        if x.iter().any(|u| u.norm() < DIVERGENCE_RANGE.0 || u.norm() > DIVERGENCE_RANGE.1) {
            return SeedOutcome::Diverged { iterations: it + 1 };
        }
    }
    match ratio_system(&x, &ctx) {
        Ok((r, _)) if max_norm(&r) < opts.tolerance => {
            SeedOutcome::Converged { roots: x, iterations: opts.max_iterations, residual: max_norm(&r) }
        }
        _ => SeedOutcome::MaxIterations { residual: res },
    }
}

fn max_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Nearest exact-diagonalization eigenvalue and the eigenvector test.
#[derive(Debug, Clone, PartialEq)]
pub struct EdMatch {
    pub probe: C64,
    pub eigenvalue: C64,
    pub nearest: C64,
    pub index: usize,
    pub abs_gap: f64,
    pub rel_gap: f64,
    /// `‖t|ū⟩ − Λ|ū⟩‖ / max(‖t|ū⟩‖, |Λ|‖|ū⟩‖)`.
    pub eigenvector_residual: f64,
}

/// An on-shell rapidity set with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct BetheSolution {
    pub roots: RapiditySet,
    /// Normalized `|E(uᵢ, ūᵢ)|` per root.
    pub residuals: Vec<f64>,
    /// `Λ(p, ū)` at each of [`PROBES`].
    pub probe_values: [C64; 3],
    /// `‖B(u₁)⋯B(u_M)|0⟩‖ / Πᵢ ‖B(uᵢ)|0⟩‖`; roundoff-level values mean the
    /// vector has collapsed.
    pub vector_scale: f64,
    pub ed_match: Option<EdMatch>,
    /// Index of the first seed that reached this solution.
    pub seed: usize,
}

impl BetheSolution {
    pub fn from_roots(roots: Vec<C64>, params: &ModelParams, seed: usize) -> Result<Self> {
        let ctx = CoefficientContext::new(*params);
        let roots = RapiditySet::new(roots, params)?;
        let residuals = normalized_residuals(roots.values(), &ctx)?;
        let mut probe_values = [C64::zero(); 3];
        for (p, val) in PROBES.iter().zip(probe_values.iter_mut()) {
            *val = eigenvalue(*p, roots.values(), &ctx)?;
        }
        let mut scale = 1.0;
        for &u in roots.values() {
            scale *= bethe_vector(&[u], params)?.norm();
        }
        let vector_scale = bethe_vector(roots.values(), params)?.norm() / scale;
        Ok(Self { roots, residuals, probe_values, vector_scale, ed_match: None, seed })
    }

    /// `u ↦ Λ(u, ū)`.
    pub fn eigenvalue(&self, u: C64, ctx: &CoefficientContext) -> Result<C64> {
        eigenvalue(u, self.roots.values(), ctx)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_collapsed(&self) -> bool {
        self.vector_scale < COLLAPSE_THRESHOLD
    }

    /// Same eigenvalue function at every probe.
    pub fn same_state(&self, other: &Self) -> bool {
        self.probe_values.iter().zip(other.probe_values.iter()).all(|(a, b)| {
            (a - b).norm() <= DEDUP_TOLERANCE * a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
        })
    }
}

/// Summary of a multi-start solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub m: usize,
    pub seeds: usize,
    pub converged: usize,
    pub singular: usize,
    pub diverged: usize,
    pub stalled: usize,
    pub max_iterations: usize,
    /// Converged runs rejected because the final residual missed the
    /// tolerance after guard filtering.
    pub rejected: usize,
    pub solutions: Vec<BetheSolution>,
}

/// Collects per-seed outcomes into deduplicated solutions, ordered by the
/// eigenvalue at the first probe.
pub fn collect_solutions(
    m: usize,
    outcomes: &[SeedOutcome],
    params: &ModelParams,
    opts: &SolverOptions,
) -> SolveReport {
    let mut report = SolveReport {
        m,
        seeds: outcomes.len(),
        converged: 0,
        singular: 0,
        diverged: 0,
        stalled: 0,
        max_iterations: 0,
        rejected: 0,
        solutions: Vec::new(),
    };
    for (seed, out) in outcomes.iter().enumerate() {
        match out {
            SeedOutcome::Converged { roots, .. } => {
                report.converged += 1;
                let sol = match BetheSolution::from_roots(roots.clone(), params, seed) {
                    Ok(s) if s.max_residual() < opts.tolerance => s,
                    _ => {
                        report.rejected += 1;
                        continue;
                    }
                };
                if !report.solutions.iter().any(|s| s.same_state(&sol)) {
                    report.solutions.push(sol);
                }
            }
            SeedOutcome::Singular { .. } => report.singular += 1,
            SeedOutcome::Diverged { .. } => report.diverged += 1,
            SeedOutcome::Stalled { .. } => report.stalled += 1,
            SeedOutcome::MaxIterations { .. } => report.max_iterations += 1,
        }
    }
    report.solutions.sort_by(|a, b| {
        let (x, y) = (a.probe_values[0], b.probe_values[0]);
        x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im))
    });
    report
}

/// Multi-start Newton solve of the Bethe equations with `M` roots.
pub fn solve_bethe(m: usize, params: &ModelParams, opts: &SolverOptions) -> Result<SolveReport> {
    if m == 0 {
        return Err(Error::OutOfRange { what: "M", value: 0, allowed: "≥ 1".into() });
    }
    let outcomes: Vec<SeedOutcome> = seed_points(m, params, opts).iter().map(|s| newton(s, params, opts)).collect();
    Ok(collect_solutions(m, &outcomes, params, opts))
}

/// The spectrum of `t(probe)` by dense diagonalization, reusable across
/// solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct EdSpectrum {
    pub probe: C64,
    pub transfer: QOperator,
    pub eigenvalues: Vec<C64>,
}

impl EdSpectrum {
    pub fn new(probe: C64, params: &ModelParams) -> Result<Self> {
        let transfer = transfer_matrix_columns(probe, params)?;
        let eigenvalues = linalg::eigenvalues_by_sector(&transfer.to_dense(), &weight_sectors(params.sites()))?;
        Ok(Self { probe, transfer, eigenvalues })
    }

    /// Nearest eigenvalue to `Λ(probe, ū)` and the eigenvector test.
    pub fn compare(&self, solution: &BetheSolution, params: &ModelParams) -> Result<EdMatch> {
        let ctx = CoefficientContext::new(*params);
        let lambda = solution.eigenvalue(self.probe, &ctx)?;
        let (index, nearest) = self
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| (a.1 - lambda).norm().total_cmp(&(b.1 - lambda).norm()))
            .ok_or_else(|| Error::Numerical("empty spectrum".into()))?;
        let abs_gap = (nearest - lambda).norm();
        let psi = bethe_vector(solution.roots.values(), params)?;
        let tpsi = self.transfer.apply(&psi);
        Ok(EdMatch {
            probe: self.probe,
            eigenvalue: lambda,
            nearest,
            index,
            abs_gap,
            rel_gap: abs_gap / lambda.norm().max(f64::MIN_POSITIVE),
            eigenvector_residual: rel(&tpsi, &(&psi * lambda)),
        })
    }
}

/// Compares `Λ(probe, ū)` with the spectrum of `t(probe)` and tests the
/// Bethe vector as an eigenvector.
pub fn verify_against_ed(solution: &BetheSolution, probe: C64, params: &ModelParams) -> Result<EdMatch> {
    EdSpectrum::new(probe, params)?.compare(solution, params)
}

/// Relative eigenvector residual of `|ū⟩` under `t(u)`, matrix-free.
pub fn eigenvector_residual(u: C64, ubar: &[C64], params: &ModelParams) -> Result<f64> {
    let ctx = CoefficientContext::new(*params);
    let psi = bethe_vector(ubar, params)?;
    let tpsi = BlockAction::new(u, params)?.transfer(&psi, params);
    Ok(rel(&tpsi, &(&psi * eigenvalue(u, ubar, &ctx)?)))
}

/// `|⟨a|b⟩| / (‖a‖‖b‖)` with the Hermitian product; 1 means proportional.
pub fn alignment(a: &StateVector, b: &StateVector) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        0.0
    } else {
        a.dotc(b).norm() / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::model::Branch;
    use crate::monodromy::transfer_matrix;
    use crate::monodromy::TransferMethod;

    fn params(n: usize) -> ModelParams {
        ModelParams::new(n, c64(1.1, 0.2), Branch::Plus).unwrap()
    }

    fn draw(m: usize, p: &ModelParams, seed: u64) -> RapiditySet {
        let pts = Sampler::new(seed).regular_points(m, &[], p.q());
        RapiditySet::new(pts, p).unwrap()
    }

    #[test]
    fn guards() {
        let p = params(2);
        assert!(RapiditySet::new(vec![c64(1.0, 0.0)], &p).is_err());
        assert!(RapiditySet::new(vec![c64(0.0, 0.0)], &p).is_err());
        let u = c64(0.8, 0.3);
        assert!(RapiditySet::new(vec![u, u], &p).is_err());
        assert!(RapiditySet::new(vec![u, u.inv()], &p).is_err());
        assert!(RapiditySet::new(vec![u, (p.q() * u).inv()], &p).is_err());
        assert!(RapiditySet::new(vec![u, -u], &p).is_err());
        assert!(RapiditySet::new(vec![u, c64(-0.5, 1.1)], &p).is_ok());
    }

    #[test]
    fn vectors_are_symmetric_and_reduce_to_reference() {
        let p = params(3);
        assert_eq!(bethe_vector(&[], &p).unwrap(), reference_state(3));
        let s = draw(2, &p, 11);
        let (a, b) = (s.values()[0], s.values()[1]);
        let v1 = bethe_vector(&[a, b], &p).unwrap();
        let v2 = bethe_vector(&[b, a], &p).unwrap();
        assert!(rel(&v1, &v2) < 1e-12);
        let w1 = dual_bethe_vector(&[a, b], &p).unwrap();
        let w2 = dual_bethe_vector(&[b, a], &p).unwrap();
        assert!(rel(&w1, &w2) < 1e-12);
        assert!(v1.norm() > 0.0 && w1.norm() > 0.0);
    }

    #[test]
    fn one_magnon_vector_support() {
        // B lowers the total weight by two units: |0⟩ = |++⟩ → |+−⟩, |00⟩, |−+⟩.
        let p = params(2);
        let v = bethe_vector(&[c64(0.8, 0.4)], &p).unwrap();
        for (i, z) in v.iter().enumerate() {
            let on = [2usize, 4, 6].contains(&i);
            assert_eq!(z.norm() > 1e-12, on, "index {i}");
        }
    }

    #[test]
    fn empty_eigenvalue_is_reference_eigenvalue() {
        let p = params(3);
        let ctx = CoefficientContext::new(p);
        let u = c64(0.7, 0.5);
        let lam = eigenvalue(u, &[], &ctx).unwrap();
        let expected = ctx.a(u).unwrap() * ctx.lambda1(u).unwrap() + ctx.d(u).unwrap() * ctx.lambda2(u).unwrap();
        assert!((lam - expected).norm() < 1e-12 * lam.norm());
        let t = transfer_matrix(u, &p, TransferMethod::Trace).unwrap();
        let zero = reference_state(3);
        assert!(rel(&t.apply(&zero), &(&zero * lam)) < 1e-13);
    }

    #[test]
    fn eigenvalue_is_even_in_each_root() {
        let p = params(3);
        let ctx = CoefficientContext::new(p);
        let s = draw(2, &p, 5);
        let u = c64(0.9, -0.2);
        let flipped = [-s.values()[0], s.values()[1]];
        let a = eigenvalue(u, s.values(), &ctx).unwrap();
        let b = eigenvalue(u, &flipped, &ctx).unwrap();
        assert!((a - b).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn one_magnon_residual_is_difference_of_powers() {
        let p = params(3);
        let ctx = CoefficientContext::new(p);
        let u = c64(0.85, 0.35);
        let e = bethe_residual(0, &[u], &ctx).unwrap();
        let expected = om(p.q() * u).powi(6) - om(u).powi(6);
        assert!((e - expected).norm() < 1e-12 * expected.norm());
        for r in one_magnon_roots(&p) {
            assert!(normalized_residuals(&[r], &ctx).unwrap()[0] < 1e-12);
        }
    }

    #[test]
    fn offshell_both_sides() {
        for n in [2, 3] {
            let p = params(n);
            for m in 0..=3 {
                let s = draw(m, &p, 100 + m as u64);
                let u = Sampler::new(7).regular_point(s.values(), p.q());
                for side in [Side::Right, Side::Left] {
                    let r = offshell_residual(u, &s, &p, side).unwrap();
                    assert!(r < 1e-10, "N={n} M={m} {side:?}: {r:e}");
                }
            }
        }
    }

    #[test]
    fn propositions_small() {
        let p = params(2);
        for m in 1..=3 {
            let s = draw(m, &p, 40 + m as u64);
            let u = Sampler::new(9).regular_point(s.values(), p.q());
            for which in Proposition::ALL {
                let r = check_proposition(u, &s, &p, which).unwrap();
                assert!(r < 1e-10, "M={m} {which:?}: {r:e}");
            }
        }
    }

    #[test]
    fn solver_finds_one_magnon_oracle() {
        let p = params(2);
        let opts = SolverOptions { seeds: 40, ..Default::default() };
        let report = solve_bethe(1, &p, &opts).unwrap();
        assert!(!report.solutions.is_empty());
        let ctx = CoefficientContext::new(p);
        let oracle: Vec<C64> = one_magnon_roots(&p)
            .iter()
            .map(|&r| eigenvalue(PROBES[0], &[r], &ctx).unwrap())
            .collect();
        for sol in &report.solutions {
            assert!(sol.max_residual() < SOLVER_TOLERANCE);
            let lam = sol.probe_values[0];
            assert!(oracle.iter().any(|o| (o - lam).norm() < 1e-8 * lam.norm()));
            let ed = verify_against_ed(sol, PROBES[1], &p).unwrap();
            assert!(ed.rel_gap < 1e-8, "{ed:?}");
            assert!(ed.eigenvector_residual < 1e-7, "{ed:?}");
        }
    }

    #[test]
    fn offshell_vector_is_not_an_eigenvector() {
        let p = params(2);
        let s = draw(1, &p, 3);
        assert!(eigenvector_residual(c64(0.9, 0.3), s.values(), &p).unwrap() > 1e-2);
    }
}
