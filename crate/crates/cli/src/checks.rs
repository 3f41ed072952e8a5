//! The identity suite behind `tl-bethe check`.
//!
//! Each check draws its own samples from a stream seeded by the run seed and
//! the check name, so checks are independent of each other and of the order
//! in which the worker pool runs them.

use rayon::prelude::*;
use serde::Serialize;
use tl_bethe_core::bethe::{self, one_magnon_roots, Proposition};
use tl_bethe_core::lax;
use tl_bethe_core::model::{self, biquadratic_x, build_x, build_x_general};
use tl_bethe_core::monodromy::{self, DerivativeMethod, ExchangeSide, DENSE_MAX_SITES};
use tl_bethe_core::residual;
use tl_bethe_core::sampling::Sampler;
use tl_bethe_core::scalar_product::{self, SlavnovInput};
use tl_bethe_core::{c64, CoefficientContext, ModelParams, RapiditySet, Result, Side, C64};

use crate::output::finite;

/// Step of the Richardson-extrapolated finite difference for `t′(1)`.
pub const FD_STEP: f64 = 1e-4;

/// Agreement required of the determinant formula with direct products.
pub const SLAVNOV_TOLERANCE: f64 = 1e-6;

/// Agreement required of the large-`u` limit.
pub const LIMIT_TOLERANCE: f64 = 1e-6;

/// Modulus at which the large-`u` limit is evaluated.
pub const LIMIT_MODULUS: f64 = 1e6;

/// Largest root count exercised by the identity checks.
const MAX_M: usize = 3;

#[derive(Debug, Clone, Copy)]
enum Tol {
    Identity,
    Derivative,
    Fixed(f64),
}

/// What a check measured.
#[derive(Debug, Clone, Copy)]
struct Measure {
    sites: Option<usize>,
    samples: usize,
    residual: f64,
}

struct Env {
    params: ModelParams,
    samples: usize,
    seed: u64,
}

impl Env {
    fn sampler(&self) -> Sampler {
        Sampler::new(self.seed)
    }

    fn at(&self, sites: usize) -> Result<ModelParams> {
        self.params.with_sites(sites)
    }

    fn q(&self) -> C64 {
        self.params.q()
    }
}

struct Check {
    name: &'static str,
    identity: &'static str,
    tol: Tol,
    run: fn(&Env) -> Result<Measure>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    /// The identity being certified, written out in words.
    #[serde(rename = "paper_ref")]
    pub identity: &'static str,
    pub sites: Option<usize>,
    pub samples: usize,
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// FNV-1a, used only to derive stable per-check seeds.
fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn max_over(n: usize, mut f: impl FnMut(usize) -> Result<f64>) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..n {
        let r = f(i)?;
        worst = if r.is_nan() { f64::NAN } else { worst.max(r) };
    }
    Ok(worst)
}

fn measure(sites: Option<usize>, samples: usize, residual: f64) -> Measure {
    Measure { sites, samples, residual }
}

/// Operator checks built from dense monodromies run at this size or less.
fn dense_sites(n: usize, cap: usize) -> usize {
    n.clamp(2, cap.min(DENSE_MAX_SITES))
}

fn tl_relations(env: &Env) -> Result<Measure> {
    let n = env.params.sites().max(3);
    let r = model::check_tl_relations(&env.at(n)?)?;
    Ok(measure(Some(n), 1, r.max_residual()))
}

fn x_general_formula(env: &Env) -> Result<Measure> {
    Ok(measure(None, 1, residual::matrix(&build_x_general(&env.params), &build_x(&env.params))))
}

fn x_biquadratic_limit(env: &Env) -> Result<Measure> {
    let p = ModelParams::new(2, c64(1.0, 0.0), env.params.branch())?;
    Ok(measure(None, 1, residual::matrix(&build_x(&p), &biquadratic_x())))
}

fn yang_baxter(env: &Env) -> Result<Measure> {
    let mut s = env.sampler();
    let other = ModelParams::new(2, env.params.big_q(), env.params.branch().other())?;
    let r = max_over(env.samples, |_| {
        let (u, v) = (s.point(), s.point());
        Ok(lax::check_yang_baxter(u, v, &env.params)?.max(lax::check_yang_baxter(u, v, &other)?))
    })?;
    Ok(measure(None, env.samples, r))
}

fn unitarity(env: &Env) -> Result<Measure> {
    let mut s = env.sampler();
    let other = ModelParams::new(2, env.params.big_q(), env.params.branch().other())?;
    let r = max_over(env.samples, |_| {
        let u = s.point();
        Ok(lax::check_unitarity(u, &env.params)?.max(lax::check_unitarity(u, &other)?))
    })?;
    Ok(measure(None, env.samples, r))
}

fn pair_check(env: &Env, cap: usize, f: fn(C64, C64, &ModelParams) -> Result<f64>) -> Result<Measure> {
    let n = dense_sites(env.params.sites(), cap);
    let p = env.at(n)?;
    let mut s = env.sampler();
    let r = max_over(env.samples, |_| {
        let uv = s.regular_points(2, &[], env.q());
        f(uv[0], uv[1], &p)
    })?;
    Ok(measure(Some(n), env.samples, r))
}

fn rtt(env: &Env) -> Result<Measure> {
    pair_check(env, 3, monodromy::check_rtt)
}

fn reflection(env: &Env) -> Result<Measure> {
    pair_check(env, 3, monodromy::check_reflection_equation)
}

fn commutativity(env: &Env) -> Result<Measure> {
    pair_check(env, 4, monodromy::check_commutativity)
}

fn exchange_b(env: &Env) -> Result<Measure> {
    pair_check(env, 4, |u, v, p| Ok(monodromy::check_exchange_relations(u, v, p, ExchangeSide::B)?.max_residual()))
}

fn exchange_c(env: &Env) -> Result<Measure> {
    pair_check(env, 4, |u, v, p| Ok(monodromy::check_exchange_relations(u, v, p, ExchangeSide::C)?.max_residual()))
}

fn cb_commutation(env: &Env) -> Result<Measure> {
    pair_check(env, 4, monodromy::check_cb_commutation)
}

fn hamiltonian(env: &Env, method: DerivativeMethod) -> Result<Measure> {
    let n = dense_sites(env.params.sites(), 4);
    let r = monodromy::hamiltonian_from_transfer(&env.at(n)?, method)?;
    Ok(measure(Some(n), 1, r.residual))
}

fn hamiltonian_analytic(env: &Env) -> Result<Measure> {
    hamiltonian(env, DerivativeMethod::Analytic)
}

fn hamiltonian_fd(env: &Env) -> Result<Measure> {
    hamiltonian(env, DerivativeMethod::FiniteDifference { step: FD_STEP })
}

fn derivative_agreement(env: &Env) -> Result<Measure> {
    let n = dense_sites(env.params.sites(), 4);
    Ok(measure(Some(n), 1, monodromy::derivative_agreement(&env.at(n)?, FD_STEP)?))
}

fn reference_state(env: &Env) -> Result<Measure> {
    let n = dense_sites(env.params.sites(), 4);
    let p = env.at(n)?;
    let mut s = env.sampler();
    let r = max_over(env.samples, |_| Ok(monodromy::check_reference_state(s.point(), &p)?.max_residual()))?;
    Ok(measure(Some(n), env.samples, r))
}

fn collapse_identities(env: &Env) -> Result<Measure> {
    let ctx = CoefficientContext::new(env.params);
    let mut s = env.sampler();
    let r = max_over(env.samples, |_| {
        let uv = s.regular_points(2, &[], env.q());
        let (a, b) = ctx.check_identity_332(uv[0], uv[1])?;
        Ok(a.max(b))
    })?;
    Ok(measure(None, env.samples, r))
}

fn appendix_identities(env: &Env) -> Result<Measure> {
    let ctx = CoefficientContext::new(env.params);
    let mut s = env.sampler();
    let mut worst = 0.0f64;
    for m in 0..=MAX_M + 1 {
        worst = worst.max(max_over(env.samples, |_| {
            let pts = s.regular_points(m + 2, &[], env.q());
            Ok(ctx.check_appendix_b(pts[0], &pts[1..])?.max_residual())
        })?);
    }
    Ok(measure(None, env.samples * (MAX_M + 2), worst))
}

fn appendix_large_u_limit(env: &Env) -> Result<Measure> {
    let ctx = CoefficientContext::new(env.params);
    let mut s = env.sampler();
    let mut worst = 0.0f64;
    for m in 0..=MAX_M + 1 {
        worst = worst.max(max_over(env.samples, |_| {
            let ubar = s.regular_points(m + 1, &[], env.q());
            let u = C64::from_polar(LIMIT_MODULUS, s.real(0.0, core::f64::consts::TAU));
            Ok(residual::scalar(ctx.b2_combination(u, &ubar)?, ctx.r(m)))
        })?);
    }
    Ok(measure(None, env.samples * (MAX_M + 2), worst))
}

fn proposition(env: &Env, which: Proposition) -> Result<Measure> {
    let n = dense_sites(env.params.sites(), 3);
    let p = env.at(n)?;
    let mut s = env.sampler();
    let mut worst = 0.0f64;
    for m in 1..=MAX_M {
        worst = worst.max(max_over(env.samples, |_| {
            let pts = s.regular_points(m + 1, &[], env.q());
            let ubar = RapiditySet::new(pts[1..].to_vec(), &p)?;
            bethe::check_proposition(pts[0], &ubar, &p, which)
        })?);
    }
    Ok(measure(Some(n), env.samples * MAX_M, worst))
}

fn proposition_right_a(env: &Env) -> Result<Measure> {
    proposition(env, Proposition::RightA)
}

fn proposition_right_d(env: &Env) -> Result<Measure> {
    proposition(env, Proposition::RightD)
}

fn proposition_left_a(env: &Env) -> Result<Measure> {
    proposition(env, Proposition::LeftA)
}

fn proposition_left_d(env: &Env) -> Result<Measure> {
    proposition(env, Proposition::LeftD)
}

fn offshell(env: &Env, side: Side) -> Result<Measure> {
    let n = dense_sites(env.params.sites(), 6);
    let p = env.at(n)?;
    let mut s = env.sampler();
    let mut worst = 0.0f64;
    for m in 0..=MAX_M {
        worst = worst.max(max_over(env.samples, |_| {
            let pts = s.regular_points(m + 1, &[], env.q());
            let ubar = RapiditySet::new(pts[1..].to_vec(), &p)?;
            bethe::offshell_residual(pts[0], &ubar, &p, side)
        })?);
    }
    Ok(measure(Some(n), env.samples * (MAX_M + 1), worst))
}

fn offshell_right(env: &Env) -> Result<Measure> {
    offshell(env, Side::Right)
}

fn offshell_left(env: &Env) -> Result<Measure> {
    offshell(env, Side::Left)
}

fn rel(a: &tl_bethe_core::StateVector, b: &tl_bethe_core::StateVector) -> f64 {
    residual::vector(a, b)
}

fn bethe_symmetry(env: &Env) -> Result<Measure> {
    let n = dense_sites(env.params.sites(), 6);
    let p = env.at(n)?;
    let ctx = CoefficientContext::new(p);
    let mut s = env.sampler();
    let r = max_over(env.samples, |_| {
        let pts = s.regular_points(3, &[], env.q());
        let (u, a, b) = (pts[0], pts[1], pts[2]);
        let right = rel(&bethe::bethe_vector(&[a, b], &p)?, &bethe::bethe_vector(&[b, a], &p)?);
        let left = rel(&bethe::dual_bethe_vector(&[a, b], &p)?, &bethe::dual_bethe_vector(&[b, a], &p)?);
        let even = residual::scalar(bethe::eigenvalue(u, &[a, b], &ctx)?, bethe::eigenvalue(u, &[-a, b], &ctx)?);
        Ok(right.max(left).max(even))
    })?;
    Ok(measure(Some(n), env.samples, r))
}

fn m1_expansion(env: &Env) -> Result<Measure> {
    let n = dense_sites(env.params.sites(), 6);
    let p = env.at(n)?;
    let mut s = env.sampler();
    let r = max_over(env.samples, |_| {
        let uv = s.regular_points(2, &[], env.q());
        Ok(scalar_product::check_m1_expansion(uv[0], uv[1], &p)?.residual)
    })?;
    Ok(measure(Some(n), env.samples, r))
}

/// On-shell one-magnon roots of a chain that are regular enough to enter the
/// scalar-product formula, one per `±u` pair.
pub fn usable_m1_roots(p: &ModelParams) -> Vec<C64> {
    one_magnon_roots(p)
        .into_iter()
        .step_by(2)
        .filter(|&u| RapiditySet::new(vec![u], p).is_ok())
        .collect()
}

fn c2_annihilation(env: &Env) -> Result<Measure> {
    let n = dense_sites(env.params.sites(), 6);
    let p = env.at(n)?;
    let roots = usable_m1_roots(&p);
    let r = max_over(roots.len(), |i| Ok(scalar_product::check_c2_annihilation(roots[i], &p)?.ratio))?;
    Ok(measure(Some(n), roots.len(), r))
}

fn slavnov_m1(env: &Env) -> Result<Measure> {
    let n = dense_sites(env.params.sites(), 6);
    let p = env.at(n)?;
    let roots = usable_m1_roots(&p);
    let mut s = env.sampler();
    let mut worst = 0.0f64;
    for &u in &roots {
        worst = worst.max(max_over(env.samples, |_| {
            let v = s.regular_point(&[u], env.q());
            let input = SlavnovInput::new(RapiditySet::new(vec![u], &p)?, RapiditySet::new(vec![v], &p)?, p)?;
            Ok(scalar_product::compare(&input)?.relative_error)
        })?);
    }
    Ok(measure(Some(n), roots.len() * env.samples, worst))
}

const SUITE: &[Check] = &[
    Check { name: "tl_relations", identity: "Temperley-Lieb relations of the generators X_i", tol: Tol::Identity, run: tl_relations },
    Check { name: "x_general_formula", identity: "general-spin formula for X at s = 1", tol: Tol::Identity, run: x_general_formula },
    Check { name: "x_biquadratic_limit", identity: "X at Q = 1 equals (S·S)² − I", tol: Tol::Identity, run: x_biquadratic_limit },
    Check { name: "yang_baxter", identity: "Yang-Baxter equation, both q branches", tol: Tol::Identity, run: yang_baxter },
    Check { name: "unitarity", identity: "R-matrix unitarity R12(u)R21(1/u) = ζ(u)", tol: Tol::Identity, run: unitarity },
    Check { name: "rtt", identity: "RTT relation of the single-row monodromy", tol: Tol::Identity, run: rtt },
    Check { name: "reflection", identity: "reflection equation of the double-row monodromy", tol: Tol::Identity, run: reflection },
    Check { name: "commutativity", identity: "[t(u), t(v)] = 0", tol: Tol::Identity, run: commutativity },
    Check { name: "hamiltonian_analytic", identity: "H = α t′(1) + β, analytic derivative", tol: Tol::Identity, run: hamiltonian_analytic },
    Check { name: "hamiltonian_fd", identity: "H = α t′(1) + β, finite-difference derivative", tol: Tol::Derivative, run: hamiltonian_fd },
    Check { name: "derivative_agreement", identity: "analytic against finite-difference t′(1)", tol: Tol::Derivative, run: derivative_agreement },
    Check { name: "exchange_b", identity: "exchange relations of A, D, B, B1, E with B", tol: Tol::Identity, run: exchange_b },
    Check { name: "exchange_c", identity: "exchange relations of A, D, C, C1, E with C", tol: Tol::Identity, run: exchange_c },
    Check { name: "cb_commutation", identity: "C(u)B(v) commutation relation", tol: Tol::Identity, run: cb_commutation },
    Check { name: "reference_state", identity: "action of the monodromy blocks on the reference state", tol: Tol::Identity, run: reference_state },
    Check { name: "collapse_identities", identity: "a f1 + Q² h2 = H and a f2 + Q² h1 = −Q² H / d", tol: Tol::Identity, run: collapse_identities },
    Check { name: "appendix_identities", identity: "γ, θ, τ identities and their barred analogues", tol: Tol::Identity, run: appendix_identities },
    Check { name: "appendix_large_u_limit", identity: "γb2 + θb2 + τb2 → r_M as u → ∞", tol: Tol::Fixed(LIMIT_TOLERANCE), run: appendix_large_u_limit },
    Check { name: "proposition_right_a", identity: "A(u) acting on B(u1)…B(uM)|0⟩, all unwanted terms", tol: Tol::Identity, run: proposition_right_a },
    Check { name: "proposition_right_d", identity: "D(u) acting on B(u1)…B(uM)|0⟩, all unwanted terms", tol: Tol::Identity, run: proposition_right_d },
    Check { name: "proposition_left_a", identity: "⟨0|C(uM)…C(u1) acted on by A(u), all unwanted terms", tol: Tol::Identity, run: proposition_left_a },
    Check { name: "proposition_left_d", identity: "⟨0|C(uM)…C(u1) acted on by D(u), all unwanted terms", tol: Tol::Identity, run: proposition_left_d },
    Check { name: "offshell_right", identity: "off-shell action of t(u) on Bethe vectors", tol: Tol::Identity, run: offshell_right },
    Check { name: "offshell_left", identity: "off-shell action of t(u) on dual Bethe vectors", tol: Tol::Identity, run: offshell_left },
    Check { name: "bethe_symmetry", identity: "Bethe vectors symmetric in ū, Λ even in each root", tol: Tol::Identity, run: bethe_symmetry },
    Check { name: "m1_expansion", identity: "⟨u1|v1⟩ expanded through C(u)B(v)", tol: Tol::Identity, run: m1_expansion },
    Check { name: "c2_annihilation", identity: "⟨0|C2(u1) = 0 on one-magnon Bethe roots", tol: Tol::Identity, run: c2_annihilation },
    Check { name: "slavnov_m1", identity: "determinant scalar product, one magnon", tol: Tol::Fixed(SLAVNOV_TOLERANCE), run: slavnov_m1 },
];

/// Names of every check, in output order.
pub fn names() -> Vec<&'static str> {
    let mut v: Vec<&'static str> = SUITE.iter().map(|s| s.name).collect();
    v.sort_unstable();
    v
}

/// Runs the full suite in parallel; results are ordered by name.
pub fn run_suite(params: &ModelParams, samples: usize) -> Vec<CheckResult> {
    let mut out: Vec<CheckResult> = SUITE
        .par_iter()
        .map(|spec| {
            let env = Env { params: *params, samples: samples.max(1), seed: params.rng_seed() ^ name_hash(spec.name) };
            let tolerance = match spec.tol {
                Tol::Identity => params.tol_identity(),
                Tol::Derivative => params.tol_derivative(),
                Tol::Fixed(t) => t,
            };
            match (spec.run)(&env) {
                Ok(m) => CheckResult {
                    name: spec.name,
                    identity: spec.identity,
                    sites: m.sites,
                    samples: m.samples,
                    residual: finite(m.residual),
                    tolerance,
                    pass: m.residual < tolerance,
                    error: None,
                },
                Err(e) => CheckResult {
                    name: spec.name,
                    identity: spec.identity,
                    sites: None,
                    samples: 0,
                    residual: None,
                    tolerance,
                    pass: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    out.sort_by(|a, b| a.name.cmp(b.name));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use tl_bethe_core::Branch;

    #[test]
    fn names_are_unique() {
        let n = names();
        let mut d = n.clone();
        d.dedup();
        assert_eq!(n, d);
    }

    #[test]
    fn seeds_differ_per_check() {
        assert_ne!(name_hash("rtt"), name_hash("reflection"));
        assert_eq!(name_hash(""), 0xcbf2_9ce4_8422_2325);
    }

    #[test]
    fn small_suite_passes() {
        let p = ModelParams::new(2, c64(1.1, 0.0), Branch::Plus).unwrap();
        for r in run_suite(&p, 2) {
            assert!(r.pass, "{r:?}");
        }
    }
}
