use std::fs;
use std::process::Command;

use singpert::driver::*;

fn minimal(w1: &str, terms: &[&str]) -> ProblemFile {
    let terms: Vec<String> = terms.iter().map(|t| format!("\"{t}\"")).collect();
    ProblemFile::from_toml(&format!(
        r#"
name = "first_order"

[system]
chart = ["x", "y"]
independent = "x"
zero_order = ["dy + y*dx"]
perturbation = ["{w1}"]

[ansatz]
terms = [{}]

[transform]
[[transform.invariants]]
expr = "y*exp(x)"
"#,
        terms.join(", ")
    ))
    .unwrap()
}

#[test]
fn problem_files_round_trip() {
    for name in builtin_names() {
        let pf = builtin(name).unwrap();
        let again = ProblemFile::from_toml(&pf.to_toml()).unwrap();
        assert_eq!(pf, again, "{name}");
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let src = builtin_source("wkb").unwrap().replace("[ansatz]", "[ansatz]\nextra = 1");
    let e = ProblemFile::from_toml(&src).unwrap_err();
    assert_eq!(e.stage, Stage::Parse);
    assert!(e.message.contains("extra"), "{e}");
}

#[test]
fn unknown_builtin_lists_cases() {
    let e = builtin("duffing").unwrap_err();
    for n in builtin_names() {
        assert!(e.message.contains(n));
    }
}

#[test]
fn empty_ansatz_is_insufficient() {
    let pf = minimal("y^2*dx", &[]);
    let e = run_case(&pf, &Overrides::default(), false).unwrap_err();
    assert_eq!(e.stage, Stage::Solve);
    assert!(e.message.contains("ansatz insufficient"), "{e}");
}

#[test]
fn zero_perturbation_is_identity() {
    let pf = minimal("0", &["y"]);
    let r = run_case(&pf, &Overrides::default(), false).unwrap();
    assert!(r.solution.components.iter().all(|c| c == "0"));
    assert_eq!(r.solution.nonzero, 0);
    assert!(r.asymptotic.relations.iter().any(|x| x.contains("y*exp(x)")), "{:?}", r.asymptotic.relations);
    assert!(r.passed);
}

#[test]
fn undeclared_symbol_names_the_expression() {
    let pf = minimal("k*y*dx", &["y"]);
    let e = run_case(&pf, &Overrides::default(), false).unwrap_err();
    assert_eq!(e.stage, Stage::Parse);
    assert!(e.expr.as_deref().unwrap_or("").contains('k'), "{e}");
}

#[test]
fn analysis_only_report_has_two_files() {
    let pf = builtin("boundary_layer").unwrap();
    let r = run_case(&pf, &Overrides::default(), false).unwrap();
    assert!(r.validation.is_none());
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&r, dir.path()).unwrap();
    assert_eq!(files.len(), 2);
    assert_eq!(load_report(dir.path()).unwrap(), r);
}

#[test]
fn boundary_layer_report_round_trips() {
    let r = run_case(&builtin("boundary_layer").unwrap(), &Overrides::default(), true).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&r, dir.path()).unwrap();
    assert_eq!(files.len(), 3);
    let back = load_report(dir.path()).unwrap();
    assert_eq!(back.to_json(), r.to_json());
    let csv = fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    assert!(csv.starts_with("case,epsilon,x_or_t,reference,asymptotic,abs_error\n"));
    // 401 grid points per epsilon
    assert_eq!(csv.lines().count(), 1 + 3 * 401);
}

#[test]
fn reruns_are_byte_identical() {
    for name in builtin_names() {
        let pf = builtin(name).unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        emit_report(&run_case(&pf, &Overrides::default(), true).unwrap(), a.path()).unwrap();
        emit_report(&run_case(&pf, &Overrides::default(), true).unwrap(), b.path()).unwrap();
        for f in ["report.json", "solution.txt", "errors.csv"] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{name}/{f}");
        }
    }
}

#[test]
fn overrides_reach_the_validation() {
    let ov = Overrides {
        eps_ladder: Some(vec![0.2, 0.1, 0.05, 0.025]),
        tol: Some(1e-9),
        ansatz_depth: None,
    };
    let r = run_case(&builtin("boundary_layer").unwrap(), &ov, true).unwrap();
    let v = r.validation.unwrap();
    assert_eq!(v.summary.len(), 4);
    assert!(v.checks.iter().any(|c| c.bound == 1e-8));
}

#[test]
fn report_json_rejects_other_schemas() {
    let r = run_case(&builtin("wkb").unwrap(), &Overrides::default(), false).unwrap();
    let text = r.to_json().replace(SCHEMA, "singpert.report/v0");
    assert!(Report::from_json(&text).is_err());
}

fn cli(args: &[&str], dir: Option<&std::path::Path>) -> (i32, String) {
    let mut c = Command::new(env!("CARGO_BIN_EXE_singpert"));
    c.args(args).env_remove("SINGPERT_REPORT_DIR");
    if let Some(d) = dir {
        c.env("SINGPERT_REPORT_DIR", d);
    }
    let o = c.output().unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stdout).into_owned())
}

#[test]
fn cli_exit_codes() {
    assert_eq!(cli(&["builtin", "boundary_layer"], None).0, 0);
    assert_eq!(cli(&["builtin", "no_such_case"], None).0, 2);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = 1").unwrap();
    assert_eq!(cli(&["analyze", bad.to_str().unwrap()], None).0, 2);
    // A failing expectation is an acceptance failure, not a pipeline error.
    let src = builtin_source("boundary_layer").unwrap().replace("explicit = \"Abar", "explicit = \"2*Abar");
    let f = dir.path().join("bl.toml");
    fs::write(&f, src).unwrap();
    assert_eq!(cli(&["analyze", f.to_str().unwrap()], None).0, 1);
}

#[test]
fn cli_report_dir_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = cli(&["builtin", "wkb", "--json"], Some(dir.path()));
    assert_eq!(code, 0);
    let r = Report::from_json(&out).unwrap();
    assert_eq!(load_report(dir.path()).unwrap(), r);
    let (code, out) = cli(&["report", dir.path().to_str().unwrap()], None);
    assert_eq!(code, 0);
    assert!(out.lines().last().unwrap().ends_with("PASS"));
}

#[test]
fn readme_example() {
    let readme = include_str!("../../../README.md");
    let start = readme.find("```toml\n").unwrap() + 8;
    let end = start + readme[start..].find("```").unwrap();
    let r = run_case(&ProblemFile::from_toml(&readme[start..end]).unwrap(), &Overrides::default(), false).unwrap();
    assert_eq!(r.solution.field, "y*d/dx");
    assert_eq!(r.asymptotic.relations, ["A = eps*y^2*exp(x) + y*exp(x)"]);
}
