//! The five subcommands. Each returns a serializable body, a text table and
//! an exit status; the caller wraps the body in the versioned envelope.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use tl_bethe_core::bethe::{
    self, collect_solutions, newton, seed_points, EdMatch, EdSpectrum, SolverOptions, PROBES,
};
use tl_bethe_core::linalg;
use tl_bethe_core::model::{build_hamiltonian, derive_q, tl_constant};
use tl_bethe_core::monodromy::{self, hamiltonian_constants, ED_MAX_SITES};
use tl_bethe_core::operator::{weight_sectors, StoragePolicy};
use tl_bethe_core::sampling::Sampler;
use tl_bethe_core::scalar_product::{self, SlavnovInput};
use tl_bethe_core::{BetheSolution, Branch, CoefficientContext, ModelParams, RapiditySet, SeedOutcome, SolveReport, C64};

use crate::checks::{self, usable_m1_roots, CheckResult, SLAVNOV_TOLERANCE};
use crate::config::RunConfig;
use crate::output::{cx_vec, finite, fmt_c, fmt_e, table, Cx};

/// Exit statuses.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Cauchy-kernel condition number above which a disagreement is attributed
/// to conditioning rather than to the formula.
pub const ILL_CONDITIONED: f64 = 1e10;

/// The largest chain for which `slavnov` forms direct products.
pub const SLAVNOV_MAX_SITES: usize = 6;

/// Marker written where exact diagonalization was not attempted.
pub const ED_SKIPPED: &str = "skipped: dimension cap";

#[derive(Debug)]
pub enum CmdError {
    /// Invalid configuration; exit status 2.
    Usage(String),
    /// The run could not be completed; exit status 1.
    Failed(String),
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CmdError::Usage(m) | CmdError::Failed(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CmdError {}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Usage(_) => EXIT_USAGE,
            CmdError::Failed(_) => EXIT_FAIL,
        }
    }
}

impl From<tl_bethe_core::Error> for CmdError {
    fn from(e: tl_bethe_core::Error) -> Self {
        CmdError::Failed(e.to_string())
    }
}

pub struct Outcome {
    pub body: Value,
    pub table: String,
    pub exit: i32,
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("report types serialize")
}

// ---------------------------------------------------------------- check

#[derive(Serialize)]
struct CheckBody<'a> {
    all_pass: bool,
    checks: &'a [CheckResult],
}

pub fn check(cfg: &RunConfig, params: &ModelParams) -> Result<Outcome, CmdError> {
    let results = checks::run_suite(params, cfg.samples);
    let all_pass = results.iter().all(|r| r.pass);
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                r.name.to_string(),
                r.sites.map_or("-".into(), |n| n.to_string()),
                r.residual.map_or("-".into(), fmt_e),
                fmt_e(r.tolerance),
                if r.pass { "pass".into() } else { "FAIL".into() },
                r.error.clone().unwrap_or_else(|| r.identity.to_string()),
            ]
        })
        .collect();
    let table = table(&["check", "N", "residual", "tolerance", "status", "identity"], &rows);
    Ok(Outcome {
        body: to_value(&CheckBody { all_pass, checks: &results }),
        table,
        exit: if all_pass { EXIT_PASS } else { EXIT_FAIL },
    })
}

// ---------------------------------------------------------------- solve

/// Multi-start solve with the seeds spread over the worker pool. The result
/// is independent of scheduling because outcomes are collected in seed
/// order.
pub fn solve_parallel(m: usize, params: &ModelParams, opts: &SolverOptions) -> SolveReport {
    let outcomes: Vec<SeedOutcome> = seed_points(m, params, opts).par_iter().map(|s| newton(s, params, opts)).collect();
    collect_solutions(m, &outcomes, params, opts)
}

#[derive(Serialize)]
struct EdEntry {
    probe: Cx,
    eigenvalue: Cx,
    nearest: Cx,
    rel_gap: f64,
    eigenvector_residual: Option<f64>,
}

impl From<&EdMatch> for EdEntry {
    fn from(m: &EdMatch) -> Self {
        Self {
            probe: Cx(m.probe),
            eigenvalue: Cx(m.eigenvalue),
            nearest: Cx(m.nearest),
            rel_gap: m.rel_gap,
            eigenvector_residual: finite(m.eigenvector_residual),
        }
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum EdSection {
    Done { matches: Vec<EdEntry> },
    Skipped(&'static str),
}

#[derive(Serialize)]
struct SolutionEntry {
    roots: Vec<Cx>,
    residuals: Vec<f64>,
    eigenvalue_at_probes: Vec<Cx>,
    vector_scale: f64,
    collapsed: bool,
    seed: usize,
    ed_gap: Option<f64>,
    ed: EdSection,
}

#[derive(Serialize)]
struct Outcomes {
    converged: usize,
    singular: usize,
    diverged: usize,
    stalled: usize,
    max_iterations: usize,
    rejected: usize,
}

#[derive(Serialize)]
struct OracleSection {
    /// One closed-form root per `2N`-th root of unity, sign fixed.
    roots: Vec<Cx>,
    /// Distinct eigenvalue functions among the closed-form roots.
    distinct_states: usize,
    /// Largest distance from a solver root to the closed-form set, up to sign.
    max_distance: Option<f64>,
    /// Closed-form states the solver did not reach.
    missed: usize,
}

fn oracle_section(report: &SolveReport, params: &ModelParams) -> Result<OracleSection, CmdError> {
    let reps: Vec<C64> = bethe::one_magnon_roots(params).into_iter().step_by(2).collect();
    let mut states: Vec<BetheSolution> = Vec::new();
    for &u in &reps {
        let s = BetheSolution::from_roots(vec![u], params, 0)?;
        if !states.iter().any(|t| t.same_state(&s)) {
            states.push(s);
        }
    }
    let max_distance = report
        .solutions
        .iter()
        .map(|s| oracle_distance(s.roots.values()[0], &reps))
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))));
    let missed = states.iter().filter(|o| !report.solutions.iter().any(|s| s.same_state(o))).count();
    Ok(OracleSection { roots: cx_vec(&reps), distinct_states: states.len(), max_distance, missed })
}

#[derive(Serialize)]
struct SolveBody {
    outcomes: Outcomes,
    solutions: Vec<SolutionEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleSection>,
}

/// Distance from `u` to the nearest closed-form root, identifying `±u`.
pub fn oracle_distance(u: C64, oracle: &[C64]) -> f64 {
    oracle.iter().map(|r| (u - r).norm().min((u + r).norm())).fold(f64::INFINITY, f64::min)
}

pub fn solve(cfg: &RunConfig, params: &ModelParams) -> Result<Outcome, CmdError> {
    if cfg.m == 0 {
        return Err(CmdError::Usage("--M must be at least 1 for solve".into()));
    }
    if cfg.seeds == 0 {
        return Err(CmdError::Usage("--seeds must be at least 1".into()));
    }
    let opts = SolverOptions { seeds: cfg.seeds, ..SolverOptions::default() };
    let report = solve_parallel(cfg.m, params, &opts);
    let spectra: Option<Vec<EdSpectrum>> = if cfg.skip_ed || params.sites() > ED_MAX_SITES {
        None
    } else {
        Some(PROBES.par_iter().map(|&p| EdSpectrum::new(p, params)).collect::<Result<_, _>>()?)
    };
    let mut solutions = Vec::with_capacity(report.solutions.len());
    for s in &report.solutions {
        let ed = match &spectra {
            Some(sp) => EdSection::Done {
                matches: sp.iter().map(|e| e.compare(s, params).map(|m| EdEntry::from(&m))).collect::<Result<_, _>>()?,
            },
            None => EdSection::Skipped(ED_SKIPPED),
        };
        let ed_gap = match &ed {
            EdSection::Done { matches } => Some(matches.iter().map(|m| m.rel_gap).fold(0.0, f64::max)),
            EdSection::Skipped(_) => None,
        };
        solutions.push(SolutionEntry {
            roots: cx_vec(s.roots.values()),
            residuals: s.residuals.clone(),
            eigenvalue_at_probes: cx_vec(&s.probe_values),
            vector_scale: s.vector_scale,
            collapsed: s.is_collapsed(),
            seed: s.seed,
            ed_gap,
            ed,
        });
    }
    let oracle = if cfg.m == 1 { Some(oracle_section(&report, params)?) } else { None };
    let rows: Vec<Vec<String>> = solutions
        .iter()
        .map(|s| {
            vec![
                s.roots.iter().map(|z| fmt_c(z.0)).collect::<Vec<_>>().join(" "),
                fmt_e(s.residuals.iter().copied().fold(0.0, f64::max)),
                fmt_c(s.eigenvalue_at_probes[0].0),
                s.ed_gap.map_or(ED_SKIPPED.into(), fmt_e),
                if s.collapsed { "collapsed".into() } else { "regular".into() },
            ]
        })
        .collect();
    let mut text = format!(
        "seeds {}  converged {}  singular {}  diverged {}  stalled {}  max-iter {}  rejected {}\n",
        report.seeds,
        report.converged,
        report.singular,
        report.diverged,
        report.stalled,
        report.max_iterations,
        report.rejected
    );
    text.push_str(&table(&["roots", "residual", "Λ(probe 1)", "ED gap", "vector"], &rows));
    let exit = if report.converged == 0 { EXIT_FAIL } else { EXIT_PASS };
    let body = SolveBody {
        outcomes: Outcomes {
            converged: report.converged,
            singular: report.singular,
            diverged: report.diverged,
            stalled: report.stalled,
            max_iterations: report.max_iterations,
            rejected: report.rejected,
        },
        solutions,
        oracle,
    };
    Ok(Outcome { body: to_value(&body), table: text, exit })
}

// ---------------------------------------------------------------- diagonalize

fn sorted(mut v: Vec<C64>) -> Vec<C64> {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    v
}

#[derive(Serialize)]
struct DiagonalizeBody {
    probe: Cx,
    hamiltonian: Vec<Cx>,
    transfer: Vec<Cx>,
}

pub fn diagonalize(cfg: &RunConfig, params: &ModelParams) -> Result<Outcome, CmdError> {
    if params.sites() > ED_MAX_SITES {
        return Err(CmdError::Usage(format!("exact diagonalization is capped at N = {ED_MAX_SITES}")));
    }
    let probe = cfg.u.unwrap_or(PROBES[0]);
    let h = build_hamiltonian(params, StoragePolicy::Dense)?;
    let sectors = weight_sectors(params.sites());
    let eh = sorted(linalg::eigenvalues_by_sector(&h.to_dense(), &sectors)?);
    let t = monodromy::transfer_matrix_columns(probe, params)?;
    let et = sorted(linalg::eigenvalues_by_sector(&t.to_dense(), &sectors)?);
    let rows: Vec<Vec<String>> =
        eh.iter().zip(&et).enumerate().map(|(i, (a, b))| vec![i.to_string(), fmt_c(*a), fmt_c(*b)]).collect();
    let table = table(&["#", "H", &format!("t({})", fmt_c(probe))], &rows);
    let body = DiagonalizeBody { probe: Cx(probe), hamiltonian: cx_vec(&eh), transfer: cx_vec(&et) };
    Ok(Outcome { body: to_value(&body), table, exit: EXIT_PASS })
}

// ---------------------------------------------------------------- slavnov

#[derive(Serialize)]
struct SlavnovRow {
    ubar: Vec<Cx>,
    vbar: Vec<Cx>,
    slavnov_value: Cx,
    direct_value: Cx,
    relative_error: f64,
    cauchy_condition: f64,
    pass: bool,
}

#[derive(Serialize)]
struct SlavnovBody {
    tolerance: f64,
    ill_conditioned_above: f64,
    /// On-shell sets skipped because the solver returned a collapsed state.
    collapsed_skipped: usize,
    rows: Vec<SlavnovRow>,
}

/// On-shell sets for `slavnov` when none are given: closed-form roots for
/// one magnon, regular solver output otherwise.
fn on_shell_sets(cfg: &RunConfig, params: &ModelParams) -> (Vec<Vec<C64>>, usize) {
    if cfg.m == 1 {
        return (usable_m1_roots(params).into_iter().map(|u| vec![u]).collect(), 0);
    }
    let opts = SolverOptions { seeds: cfg.seeds.max(1), ..SolverOptions::default() };
    let report = solve_parallel(cfg.m, params, &opts);
    let (regular, collapsed): (Vec<_>, Vec<_>) = report.solutions.iter().partition(|s| !s.is_collapsed());
    (regular.iter().map(|s| s.roots.values().to_vec()).collect(), collapsed.len())
}

pub fn slavnov(cfg: &RunConfig, params: &ModelParams) -> Result<Outcome, CmdError> {
    if params.sites() > SLAVNOV_MAX_SITES {
        return Err(CmdError::Usage(format!("slavnov needs N ≤ {SLAVNOV_MAX_SITES}")));
    }
    let (sets, collapsed) = match &cfg.ubar {
        Some(r) => {
            let set = RapiditySet::new(r.0.clone(), params).map_err(|e| CmdError::Usage(e.to_string()))?;
            let ctx = CoefficientContext::new(*params);
            let worst = bethe::normalized_residuals(set.values(), &ctx)
                .map_err(|e| CmdError::Usage(e.to_string()))?
                .into_iter()
                .fold(0.0, f64::max);
            if worst >= scalar_product::ON_SHELL_TOLERANCE {
                return Err(CmdError::Usage(format!(
                    "--ubar is not on-shell (normalized Bethe residual {worst:.3e}); the determinant formula needs a Bethe root set"
                )));
            }
            (vec![set.values().to_vec()], 0)
        }
        None => {
            if !(1..=2).contains(&cfg.m) {
                return Err(CmdError::Usage("slavnov supports --M 1 or 2".into()));
            }
            on_shell_sets(cfg, params)
        }
    };
    let mut rows = Vec::new();
    let mut sampler = Sampler::new(params.rng_seed());
    for ubar in &sets {
        let uset = RapiditySet::new(ubar.clone(), params)?;
        for _ in 0..cfg.samples.max(1) {
            let vbar = sampler.regular_points(ubar.len(), ubar, params.q());
            let input = SlavnovInput::new(uset.clone(), RapiditySet::new(vbar.clone(), params)?, *params)?;
            let c = scalar_product::compare(&input)?;
            let ok = c.relative_error < SLAVNOV_TOLERANCE || c.slavnov.cauchy_condition >= ILL_CONDITIONED;
            rows.push(SlavnovRow {
                ubar: cx_vec(ubar),
                vbar: cx_vec(&vbar),
                slavnov_value: Cx(c.slavnov.value),
                direct_value: Cx(c.direct),
                relative_error: c.relative_error,
                cauchy_condition: c.slavnov.cauchy_condition,
                pass: ok,
            });
        }
    }
    let exit = if rows.is_empty() || rows.iter().any(|r| !r.pass) { EXIT_FAIL } else { EXIT_PASS };
    let text_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.ubar.iter().map(|z| fmt_c(z.0)).collect::<Vec<_>>().join(" "),
                fmt_c(r.slavnov_value.0),
                fmt_c(r.direct_value.0),
                fmt_e(r.relative_error),
                fmt_e(r.cauchy_condition),
            ]
        })
        .collect();
    let mut text = table(&["ubar", "determinant", "direct", "rel. error", "cond"], &text_rows);
    if rows.is_empty() {
        text.push_str("no regular on-shell rapidity sets found\n");
    }
    let body = SlavnovBody {
        tolerance: SLAVNOV_TOLERANCE,
        ill_conditioned_above: ILL_CONDITIONED,
        collapsed_skipped: collapsed,
        rows,
    };
    Ok(Outcome { body: to_value(&body), table: text, exit })
}

// ---------------------------------------------------------------- report

#[derive(Serialize)]
struct ModelSummary {
    tl_constant: Cx,
    q_plus: Cx,
    q_minus: Cx,
    alpha: Cx,
    beta: Cx,
}

#[derive(Serialize)]
struct CollapseRow {
    #[serde(rename = "M")]
    m: usize,
    converged_seeds: usize,
    distinct_states: usize,
    regular_states: usize,
    collapsed_states: usize,
    ed_verified: Option<usize>,
}

#[derive(Serialize)]
struct SignRow {
    roots: Vec<Cx>,
    flipped: usize,
    /// `|⟨a|b⟩| / ‖a‖‖b‖`; 1 means the two vectors are proportional.
    alignment: f64,
    eigenvalue_gap: f64,
}

#[derive(Serialize)]
struct ReportBody {
    model: ModelSummary,
    collapse: Vec<CollapseRow>,
    sign_flips: Vec<SignRow>,
}

/// Largest `M` surveyed by `report`.
const REPORT_MAX_M: usize = 3;

pub fn report(cfg: &RunConfig, params: &ModelParams) -> Result<Outcome, CmdError> {
    let bq = params.big_q();
    let (alpha, beta) = hamiltonian_constants(params)?;
    let model = ModelSummary {
        tl_constant: Cx(tl_constant(bq)),
        q_plus: Cx(derive_q(bq, Branch::Plus)?),
        q_minus: Cx(derive_q(bq, Branch::Minus)?),
        alpha: Cx(alpha),
        beta: Cx(beta),
    };
    let opts = SolverOptions { seeds: cfg.seeds.max(1), ..SolverOptions::default() };
    let spectra: Option<Vec<EdSpectrum>> = if params.sites() <= ED_MAX_SITES {
        Some(PROBES.iter().map(|&p| EdSpectrum::new(p, params)).collect::<Result<_, _>>()?)
    } else {
        None
    };
    let ctx = CoefficientContext::new(*params);
    let mut collapse = Vec::new();
    let mut sign_flips = Vec::new();
    for m in 1..=REPORT_MAX_M {
        let rep = solve_parallel(m, params, &opts);
        let regular: Vec<_> = rep.solutions.iter().filter(|s| !s.is_collapsed()).collect();
        let ed_verified = spectra.as_ref().map(|sp| {
            regular
                .iter()
                .filter(|s| sp.iter().all(|e| e.compare(s, params).is_ok_and(|r| r.rel_gap < 1e-7)))
                .count()
        });
        collapse.push(CollapseRow {
            m,
            converged_seeds: rep.converged,
            distinct_states: rep.solutions.len(),
            regular_states: regular.len(),
            collapsed_states: rep.solutions.len() - regular.len(),
            ed_verified,
        });
        for s in regular {
            let roots = s.roots.values();
            let a = bethe::bethe_vector(roots, params)?;
            let mut flipped = roots.to_vec();
            flipped[0] = -flipped[0];
            let b = bethe::bethe_vector(&flipped, params)?;
            let gap = tl_bethe_core::residual::scalar(
                bethe::eigenvalue(PROBES[0], roots, &ctx)?,
                bethe::eigenvalue(PROBES[0], &flipped, &ctx)?,
            );
            sign_flips.push(SignRow { roots: cx_vec(roots), flipped: 0, alignment: bethe::alignment(&a, &b), eigenvalue_gap: gap });
        }
    }
    let mut text = format!(
        "TL constant {}\nq (plus)    {}\nq (minus)   {}\nH = α t′(1) + β with α = {}, β = {}\n\n",
        fmt_c(model.tl_constant.0),
        fmt_c(model.q_plus.0),
        fmt_c(model.q_minus.0),
        fmt_c(alpha),
        fmt_c(beta)
    );
    let crow: Vec<Vec<String>> = collapse
        .iter()
        .map(|r| {
            vec![
                r.m.to_string(),
                r.converged_seeds.to_string(),
                r.distinct_states.to_string(),
                r.regular_states.to_string(),
                r.collapsed_states.to_string(),
                r.ed_verified.map_or(ED_SKIPPED.into(), |n| n.to_string()),
            ]
        })
        .collect();
    text.push_str(&table(&["M", "converged", "states", "regular", "collapsed", "ED-verified"], &crow));
    text.push('\n');
    let srow: Vec<Vec<String>> = sign_flips
        .iter()
        .map(|r| {
            vec![
                r.roots.iter().map(|z| fmt_c(z.0)).collect::<Vec<_>>().join(" "),
                format!("{:.15}", r.alignment),
                fmt_e(r.eigenvalue_gap),
            ]
        })
        .collect();
    text.push_str(&table(&["roots (first flipped)", "alignment", "Λ gap"], &srow));
    let body = ReportBody { model, collapse, sign_flips };
    Ok(Outcome { body: to_value(&body), table: text, exit: EXIT_PASS })
}
