//! The thirteen acceptance criteria, run in order with one PASS/FAIL line
//! each. Lines go straight to stdout so they show without `--nocapture`.
//! A criterion passes only if every residual meets its bound and the
//! wall-clock budget holds.

use std::io::Write;
use std::time::{Duration, Instant};

use tl_bethe::checks::{usable_m1_roots, FD_STEP, LIMIT_MODULUS};
use tl_bethe::commands::{oracle_distance, solve_parallel};
use tl_bethe_core::bethe::{self, one_magnon_roots, EdSpectrum, Proposition, SolverOptions, PROBES};
use tl_bethe_core::lax;
use tl_bethe_core::model::{biquadratic_x, build_x, check_tl_relations};
use tl_bethe_core::monodromy::{self, DerivativeMethod, ExchangeSide};
use tl_bethe_core::residual;
use tl_bethe_core::sampling::Sampler;
use tl_bethe_core::scalar_product::{self, SlavnovInput};
use tl_bethe_core::{c64, BetheSolution, Branch, CoefficientContext, ModelParams, RapiditySet, Side, C64};

const BRANCHES: [Branch; 2] = [Branch::Plus, Branch::Minus];
const Q_DEFAULT: C64 = C64::new(1.1, 0.0);

struct Verdict {
    pass: bool,
    detail: String,
}

/// Running maximum of residuals against one bound.
struct Worst {
    bound: f64,
    value: f64,
    count: usize,
}

impl Worst {
    fn new(bound: f64) -> Self {
        Self { bound, value: 0.0, count: 0 }
    }

    fn add(&mut self, r: f64) {
        self.count += 1;
        self.value = if r.is_nan() { f64::NAN } else { self.value.max(r) };
    }

    fn ok(&self) -> bool {
        self.count > 0 && self.value < self.bound
    }

    fn show(&self, what: &str) -> String {
        format!("{what} max {:.2e} < {:.0e} over {}", self.value, self.bound, self.count)
    }
}

fn params(n: usize, q: C64, b: Branch) -> ModelParams {
    ModelParams::new(n, q, b).expect("valid parameters")
}

/// A random deformation parameter away from the double-root locus.
fn random_params(s: &mut Sampler, n: usize, b: Branch) -> ModelParams {
    loop {
        if let Ok(p) = ModelParams::new(n, s.point(), b) {
            return p;
        }
    }
}

fn c1_tl_algebra() -> Verdict {
    let mut s = Sampler::new(101);
    let mut w = Worst::new(1e-12);
    for n in [3, 4] {
        for _ in 0..20 {
            w.add(check_tl_relations(&random_params(&mut s, n, Branch::Plus)).unwrap().max_residual());
        }
    }
    Verdict { pass: w.ok(), detail: w.show("TL relations, N = 3, 4, random Q:") }
}

fn c2_biquadratic() -> Verdict {
    let r = residual::matrix(&build_x(&params(2, c64(1.0, 0.0), Branch::Plus)), &biquadratic_x());
    Verdict { pass: r < 1e-13, detail: format!("‖X(Q=1) − ((S·S)² − I)‖ = {r:.2e} < 1e-13") }
}

fn c3_yang_baxter_unitarity() -> Verdict {
    let mut s = Sampler::new(103);
    let (mut yb, mut un) = (Worst::new(1e-10), Worst::new(1e-12));
    for b in BRANCHES {
        for _ in 0..100 {
            let p = random_params(&mut s, 2, b);
            let uv = s.regular_points(2, &[], p.q());
            yb.add(lax::check_yang_baxter(uv[0], uv[1], &p).unwrap());
            un.add(lax::check_unitarity(uv[0], &p).unwrap());
        }
    }
    Verdict { pass: yb.ok() && un.ok(), detail: format!("{}; {}", yb.show("YBE"), un.show("unitarity")) }
}

fn c4_rtt_reflection() -> Verdict {
    let mut s = Sampler::new(104);
    let (mut rtt, mut re) = (Worst::new(1e-10), Worst::new(1e-10));
    for n in [2, 3] {
        let p = params(n, Q_DEFAULT, Branch::Plus);
        for _ in 0..10 {
            let uv = s.regular_points(2, &[], p.q());
            rtt.add(monodromy::check_rtt(uv[0], uv[1], &p).unwrap());
            re.add(monodromy::check_reflection_equation(uv[0], uv[1], &p).unwrap());
        }
    }
    Verdict { pass: rtt.ok() && re.ok(), detail: format!("{}; {}", rtt.show("RTT"), re.show("reflection")) }
}

fn c5_commutativity() -> Verdict {
    let mut s = Sampler::new(105);
    let mut w = Worst::new(1e-10);
    for n in [2, 3, 4] {
        let p = params(n, Q_DEFAULT, Branch::Plus);
        for _ in 0..20 {
            let uv = s.regular_points(2, &[], p.q());
            w.add(monodromy::check_commutativity(uv[0], uv[1], &p).unwrap());
        }
    }
    Verdict { pass: w.ok(), detail: w.show("‖[t(u),t(v)]‖ rel., N = 2, 3, 4:") }
}

fn c6_hamiltonian() -> Verdict {
    let (mut an, mut fd) = (Worst::new(1e-11), Worst::new(1e-7));
    for n in [2, 3, 4] {
        let p = params(n, Q_DEFAULT, Branch::Plus);
        an.add(monodromy::hamiltonian_from_transfer(&p, DerivativeMethod::Analytic).unwrap().residual);
        fd.add(monodromy::derivative_agreement(&p, FD_STEP).unwrap());
    }
    Verdict { pass: an.ok() && fd.ok(), detail: format!("{}; {}", an.show("α t′(1) + β − H"), fd.show("FD vs analytic t′(1)")) }
}

fn c7_exchange() -> Verdict {
    let mut s = Sampler::new(107);
    let mut w = Worst::new(1e-10);
    for n in [2, 3] {
        let p = params(n, Q_DEFAULT, Branch::Plus);
        for _ in 0..10 {
            let uv = s.regular_points(2, &[], p.q());
            for side in [ExchangeSide::B, ExchangeSide::C] {
                for r in monodromy::check_exchange_relations(uv[0], uv[1], &p, side).unwrap().residuals {
                    w.add(r);
                }
            }
        }
    }
    Verdict { pass: w.ok(), detail: w.show("ten exchange relations, N = 2, 3:") }
}

fn c8_scalar_identities() -> Verdict {
    let mut s = Sampler::new(108);
    let (mut id, mut app, mut lim) = (Worst::new(1e-10), Worst::new(1e-10), Worst::new(1e-6));
    for b in BRANCHES {
        let ctx = CoefficientContext::new(params(3, Q_DEFAULT, b));
        let q = ctx.params().q();
        for _ in 0..50 {
            let uv = s.regular_points(2, &[], q);
            let (x, y) = ctx.check_identity_332(uv[0], uv[1]).unwrap();
            id.add(x.max(y));
            for m in 0..=4 {
                let pts = s.regular_points(m + 2, &[], q);
                app.add(ctx.check_appendix_b(pts[0], &pts[1..]).unwrap().max_residual());
                let far = C64::from_polar(LIMIT_MODULUS, s.real(0.0, std::f64::consts::TAU));
                lim.add(residual::scalar(ctx.b2_combination(far, &pts[1..]).unwrap(), ctx.r(m)));
            }
        }
    }
    Verdict {
        pass: id.ok() && app.ok() && lim.ok(),
        detail: format!("{}; {}; {}", id.show("collapse identities"), app.show("γθτ identities, M ≤ 4"), lim.show("|u| → ∞ limit")),
    }
}

fn c9_propositions() -> Verdict {
    let mut s = Sampler::new(109);
    let mut w = Worst::new(1e-10);
    for n in [2, 3] {
        let p = params(n, Q_DEFAULT, Branch::Plus);
        for which in Proposition::ALL {
            for m in 1..=3 {
                for _ in 0..3 {
                    let pts = s.regular_points(m + 1, &[], p.q());
                    let ubar = RapiditySet::new(pts[1..].to_vec(), &p).unwrap();
                    w.add(bethe::check_proposition(pts[0], &ubar, &p, which).unwrap());
                }
            }
        }
    }
    Verdict { pass: w.ok(), detail: w.show("A and D actions on B- and C-strings, M ≤ 3, N ≤ 3:") }
}

fn c10_offshell() -> Verdict {
    let mut s = Sampler::new(110);
    let mut w = Worst::new(1e-10);
    for n in [2, 3] {
        let p = params(n, Q_DEFAULT, Branch::Plus);
        for m in 0..=3 {
            for _ in 0..10 {
                let pts = s.regular_points(m + 1, &[], p.q());
                let ubar = RapiditySet::new(pts[1..].to_vec(), &p).unwrap();
                for side in [Side::Right, Side::Left] {
                    w.add(bethe::offshell_residual(pts[0], &ubar, &p, side).unwrap());
                }
            }
        }
    }
    Verdict { pass: w.ok(), detail: w.show("off-shell equations, both sides:") }
}

fn c11_spectrum() -> Verdict {
    let opts = SolverOptions::default();
    let mut gap = Worst::new(1e-7);
    let mut oracle = Worst::new(1e-10);
    let mut notes = Vec::new();
    let mut missed = 0;
    for (m, n) in [(1, 2), (1, 3), (2, 3), (2, 4)] {
        let p = params(n, Q_DEFAULT, Branch::Plus);
        let report = solve_parallel(m, &p, &opts);
        let spectra: Vec<EdSpectrum> = PROBES.iter().map(|&z| EdSpectrum::new(z, &p).unwrap()).collect();
        for sol in &report.solutions {
            for sp in &spectra {
                gap.add(sp.compare(sol, &p).unwrap().rel_gap);
            }
        }
        if m == 1 {
            let reps: Vec<C64> = one_magnon_roots(&p).into_iter().step_by(2).collect();
            for sol in &report.solutions {
                oracle.add(oracle_distance(sol.roots.values()[0], &reps));
            }
            for &u in &reps {
                let o = BetheSolution::from_roots(vec![u], &p, 0).unwrap();
                if !report.solutions.iter().any(|s| s.same_state(&o)) {
                    missed += 1;
                }
            }
        }
        notes.push(format!("({m},{n}): {} states", report.solutions.len()));
    }
    Verdict {
        pass: gap.ok() && oracle.ok() && missed == 0,
        detail: format!(
            "{}; {}; closed-form states missed {missed}; {} [(2,3) has no regular solution, so (2,4) is added]",
            gap.show("ED rel. gap"),
            oracle.show("distance to closed form"),
            notes.join(", ")
        ),
    }
}

fn c12_c2_annihilation() -> Verdict {
    let mut w = Worst::new(1e-8);
    for b in BRANCHES {
        for n in 2..=6 {
            let p = params(n, Q_DEFAULT, b);
            for u in one_magnon_roots(&p) {
                w.add(scalar_product::check_c2_annihilation(u, &p).unwrap().ratio);
            }
        }
    }
    Verdict { pass: w.ok(), detail: w.show("‖⟨0|C2(u1)‖ / ‖C2‖_F at every one-magnon root, N = 2..6, both branches:") }
}

fn c13_slavnov() -> Verdict {
    let mut s = Sampler::new(113);
    let (mut m1, mut m2) = (Worst::new(1e-6), Worst::new(1e-6));
    let mut cond = 0.0f64;
    let mut sets_m2 = Vec::new();
    let mut compare = |ubar: &[C64], p: &ModelParams, w: &mut Worst, s: &mut Sampler| {
        for _ in 0..5 {
            let vbar = s.regular_points(ubar.len(), ubar, p.q());
            let input = SlavnovInput::new(
                RapiditySet::new(ubar.to_vec(), p).unwrap(),
                RapiditySet::new(vbar, p).unwrap(),
                *p,
            )
            .unwrap();
            let c = scalar_product::compare(&input).unwrap();
            cond = cond.max(c.slavnov.cauchy_condition);
            w.add(c.relative_error);
        }
    };
    for n in 2..=6 {
        let p = params(n, Q_DEFAULT, Branch::Plus);
        for u in usable_m1_roots(&p) {
            compare(&[u], &p, &mut m1, &mut s);
        }
    }
    let opts = SolverOptions::default();
    for n in 2..=4 {
        let p = params(n, Q_DEFAULT, Branch::Plus);
        let report = solve_parallel(2, &p, &opts);
        let regular: Vec<_> = report.solutions.iter().filter(|x| !x.is_collapsed()).collect();
        sets_m2.push(format!("N={n}: {}", regular.len()));
        for sol in regular {
            compare(sol.roots.values(), &p, &mut m2, &mut s);
        }
    }
    Verdict {
        pass: m1.ok() && m2.ok(),
        detail: format!(
            "{}; {} (regular sets {}); max Cauchy condition {cond:.2e}",
            m1.show("M=1, N ≤ 6"),
            m2.show("M=2, N ≤ 4"),
            sets_m2.join(", ")
        ),
    }
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, u64, fn() -> Verdict); 13] = [
        ("TL algebra", 1, c1_tl_algebra),
        ("biquadratic limit of X", 1, c2_biquadratic),
        ("Yang-Baxter and unitarity", 5, c3_yang_baxter_unitarity),
        ("RTT and reflection equation", 30, c4_rtt_reflection),
        ("transfer-matrix commutativity", 60, c5_commutativity),
        ("Hamiltonian from t′(1)", 30, c6_hamiltonian),
        ("exchange relations", 60, c7_exchange),
        ("scalar coefficient identities", 10, c8_scalar_identities),
        ("A and D actions, full operator identities", 300, c9_propositions),
        ("off-shell transfer-matrix action", 120, c10_offshell),
        ("spectrum against exact diagonalization", 120, c11_spectrum),
        ("C2 annihilation at one-magnon roots", 300, c12_c2_annihilation),
        ("determinant scalar product", 600, c13_slavnov),
    ];
    let mut failed = Vec::new();
    let mut out = std::io::stdout().lock();
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let pass = v.pass && in_time;
        writeln!(
            out,
            "criterion {:>2} {} {name}: {} [{:.2} s, budget {budget} s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        )
        .unwrap();
        out.flush().unwrap();
        if !pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
