//! Acceptance criteria 1-8, one line each.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use proptest::strategy::Strategy;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use singpert::driver::{builtin, run_case, Overrides, Report};
use singpert::kernel::{expr, parse};
use singpert::validate::Check;

use common::*;

/// Criteria that cannot pass against the published field; see the
/// divergence check in `criterion_3`.
const DIVERGENT: &[u32] = &[3];

struct Outcome {
    passed: bool,
    /// Failed in exactly the documented way.
    known: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        known: false,
        detail: detail.into(),
    }
}

fn checks<'a>(r: &'a Report, pat: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
    r.all_checks().filter(move |c| c.name.contains(pat))
}

fn one<'a>(r: &'a Report, pat: &'a str) -> &'a Check {
    checks(r, pat).next().unwrap_or_else(|| panic!("{}: no check `{pat}`", r.case))
}

fn all_pass(r: &Report, pat: &str) -> (bool, usize, f64) {
    let cs: Vec<&Check> = checks(r, pat).collect();
    let worst = cs.iter().map(|c| c.value).fold(0.0, f64::max);
    (!cs.is_empty() && cs.iter().all(|c| c.passed), cs.len(), worst)
}

fn run(name: &str, validate: bool) -> Report {
    run_case(&builtin(name).unwrap(), &Overrides::default(), validate).unwrap()
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let r = run("boundary_layer", false);
    let secs = t0.elapsed().as_secs_f64();
    let field = one(&r, "expected field");
    outcome(
        field.passed && secs < 5.0,
        format!("X = {}; analysis {secs:.3} s", r.solution.field),
    )
}

fn criterion_2(bl: &Report) -> Outcome {
    let explicit = one(bl, "expected explicit");
    let dec = one(bl, "decreases with epsilon");
    let exp = one(bl, "fitted error exponent");
    outcome(
        explicit.passed && dec.passed && exp.passed,
        format!(
            "y = {}; errors {}; exponent {:.3} >= 0.8",
            bl.asymptotic.explicit.as_deref().unwrap_or("?"),
            dec.detail.as_deref().unwrap_or(""),
            exp.value
        ),
    )
}

fn criterion_3(ms: &Report) -> Outcome {
    let pf = builtin("nonlinear_damping").unwrap();
    let field = one(ms, "expected field");
    let expected = pf.expected.unwrap().field.unwrap();
    // The engine's d/dth component against the negated published one.
    let theta = parse(&ms.solution.components[2]).unwrap();
    let flipped = expr::neg(&parse(&expected[2]).unwrap());
    let u_ok = parse(&ms.solution.components[1]).unwrap() == parse(&expected[1]).unwrap();
    let detail = if field.passed {
        format!("X = {}", ms.solution.field)
    } else {
        format!(
            "d/du matches: {u_ok}; d/dth is the published component with opposite sign: {}",
            theta == flipped
        )
    };
    let mut o = outcome(field.passed && pf.ansatz.depth <= 2, detail);
    o.known = !o.passed && u_ok && theta == flipped;
    o
}

fn criterion_4(ms: &Report) -> Outcome {
    let explicit = one(ms, "expected explicit");
    let env = one(ms, "envelope/amplitude");
    outcome(
        explicit.passed && env.passed,
        format!(
            "R = {}; max relative envelope error {:.4} on [10, 100] at eps = 0.05",
            ms.asymptotic.explicit.as_deref().unwrap_or("?"),
            env.value
        ),
    )
}

fn criterion_5(wkb: &Report) -> Outcome {
    let field = one(wkb, "expected field");
    // Fitted WKB solution against reference integration and against cos(x/eps).
    let (cos_ok, n, worst) = all_pass(wkb, "constant_omega/");
    let phase = one(wkb, "linear_omega/phase");
    outcome(
        field.passed && cos_ok && phase.passed,
        format!(
            "X = {}; Omega = 1 worst {worst:.2e} over {n} comparisons (bound 1e-9); phase errors {}",
            wkb.solution.field,
            phase.detail.as_deref().unwrap_or("")
        ),
    )
}

fn criterion_6(reports: &[&Report]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in reports {
        let sym = one(r, "symbolic homological residual");
        let num = one(r, "numeric homological residual");
        ok &= sym.passed && num.passed;
        parts.push(format!("{}: symbolic {}, numeric {:.1e}", r.case, sym.passed, num.value));
    }
    outcome(ok, parts.join("; "))
}

fn property<S: Strategy>(name: &str, s: S, f: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<String, String> {
    let cfg = Config {
        cases: 200,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    match runner.run(&s, f) {
        Ok(()) => Ok(format!("{name} 200/200")),
        Err(e) => Err(format!("{name}: {e}")),
    }
}

fn criterion_7() -> Outcome {
    let results = [
        property("d(d f) = 0", expr(), d_squared),
        property("Cartan = Leibniz", (field(), one_form()), |(x, w)| cartan_vs_leibniz(x, w)),
        property("interior antiderivation", (field(), one_form(), one_form()), |(x, a, b)| {
            antiderivation(x, a, b)
        }),
    ];
    let ok = results.iter().all(Result::is_ok);
    let detail: Vec<String> = results.into_iter().map(|r| r.unwrap_or_else(|e| e)).collect();
    outcome(ok, detail.join("; "))
}

fn criterion_8(reports: &[&Report]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in reports {
        let (pass, n, worst) = all_pass(r, "ode_to_forms annihilate");
        ok &= pass;
        parts.push(format!("{}: {n} curves, worst {worst:.1e}", r.case));
    }
    outcome(ok, format!("{} (bound 1e-9)", parts.join("; ")))
}

fn main() -> ExitCode {
    let bl = run("boundary_layer", true);
    let ms = run("nonlinear_damping", true);
    let wkb = run("wkb", true);
    let outcomes = [
        criterion_1(),
        criterion_2(&bl),
        criterion_3(&ms),
        criterion_4(&ms),
        criterion_5(&wkb),
        criterion_6(&[&bl, &ms, &wkb]),
        criterion_7(),
        criterion_8(&[&ms, &wkb]),
    ];
    let mut unexpected = 0;
    for (k, o) in outcomes.iter().enumerate() {
        let n = k as u32 + 1;
        println!("criterion {n}: {}  {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed && !(o.known && DIVERGENT.contains(&n)) {
            unexpected += 1;
        }
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} of 8 criteria pass; {} known divergent", 8 - failed, failed - unexpected);
    if unexpected > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
