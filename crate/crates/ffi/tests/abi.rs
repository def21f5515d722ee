use std::ffi::{c_char, CStr};
use std::path::Path;
use std::process::Command;
use std::ptr;

use singpert_ffi::*;

fn take_string(p: *mut c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { sp_string_free(p) };
    s
}

#[test]
fn builtin_lifecycle() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(sp_problem_builtin(c"boundary_layer".as_ptr(), &mut p), SpStatus::Ok);
        let ladder = [0.1, 0.05, 0.025, 0.0125];
        let ov = SpOverrides {
            tol: 0.0,
            eps_ladder: ladder.as_ptr(),
            eps_len: ladder.len(),
            ansatz_depth: -1,
        };
        let mut r = ptr::null_mut();
        assert_eq!(sp_run_with(p, true, &ov, &mut r), SpStatus::Ok);
        assert!(sp_report_passed(r));
        let n = sp_report_check_count(r);
        assert!(n > 10);
        let (mut name, mut passed) = (ptr::null_mut(), false);
        assert_eq!(sp_report_check(r, 0, &mut name, &mut passed), SpStatus::Ok);
        assert_eq!(take_string(name), "expected field (canonical equality)");
        assert!(passed);
        assert_eq!(sp_report_check(r, n, &mut name, &mut passed), SpStatus::OutOfRange);

        let mut json = ptr::null_mut();
        assert_eq!(sp_report_json(r, &mut json), SpStatus::Ok);
        let report = singpert::driver::Report::from_json(&take_string(json)).unwrap();
        assert_eq!(report.validation.unwrap().summary.len(), 4);

        let dir = tempfile::tempdir().unwrap();
        let d = std::ffi::CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(sp_report_emit(r, d.as_ptr()), SpStatus::Ok);
        assert!(dir.path().join("errors.csv").exists());

        sp_report_free(r);
        sp_problem_free(p);
    }
}

#[test]
fn toml_errors_carry_a_message() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(sp_problem_from_toml(c"name = 3".as_ptr(), &mut p), SpStatus::Parse);
        let msg = CStr::from_ptr(sp_last_error()).to_str().unwrap();
        assert!(msg.starts_with("parse stage"), "{msg}");
    }
}

#[test]
fn insufficient_ansatz_is_a_pipeline_error() {
    let src = c"name = \"t\"
[system]
chart = [\"x\", \"y\"]
independent = \"x\"
zero_order = [\"dy + y*dx\"]
perturbation = [\"y^2*dx\"]
[ansatz]
terms = []
";
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(sp_problem_from_toml(src.as_ptr(), &mut p), SpStatus::Ok);
        let mut r = ptr::null_mut();
        assert_eq!(sp_run(p, false, &mut r), SpStatus::Pipeline);
        assert!(r.is_null());
        let msg = CStr::from_ptr(sp_last_error()).to_str().unwrap();
        assert!(msg.contains("ansatz insufficient"), "{msg}");
        sp_problem_free(p);
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/singpert.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["sp_problem_builtin", "sp_run_with", "sp_report_json", "sp_last_error", "SP_STATUS_PIPELINE"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-std=c99", "-x", "c"]).arg(&header).output() else {
        eprintln!("no C compiler; syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn c_program_links_and_runs() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/abi-* -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = lib_dir.join("libsingpert_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; link check skipped", lib.display());
        return;
    }
    let out_dir = tempfile::tempdir().unwrap();
    let bin = out_dir.path().join("smoke");
    let Ok(cc) = Command::new("cc")
        .arg(root.join("c/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
    else {
        eprintln!("no C compiler; link check skipped");
        return;
    };
    assert!(cc.status.success(), "{}", String::from_utf8_lossy(&cc.stderr));
    let run = Command::new(&bin).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout}");
    assert!(stdout.contains("checks, pass"), "{stdout}");
}
