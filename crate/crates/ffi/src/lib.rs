//! C ABI for the singpert pipeline.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `_free`. Every fallible call returns an [`SpStatus`]
//! and leaves a message for [`sp_last_error`] on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use singpert::driver::{builtin, emit_report, run_case, DriverError, Overrides, ProblemFile, Report, Stage};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Problem text, expression or unknown built-in name.
    Parse = 3,
    /// A pipeline stage failed: solve, transform or validation.
    Pipeline = 4,
    Io = 5,
    /// Index or option out of range.
    OutOfRange = 6,
    Panic = 7,
}

/// A parsed problem file.
pub struct SpProblem(ProblemFile);

/// The outcome of a pipeline run.
pub struct SpReport(Report);

/// Overrides for [`sp_run_with`]. Zero and null fields keep the problem's value.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpOverrides {
    pub tol: f64,
    pub eps_ladder: *const f64,
    pub eps_len: usize,
    /// Negative keeps the problem's depth.
    pub ansatz_depth: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl ToString) {
    let c = CString::new(msg.to_string().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SpStatus, msg: impl ToString) -> SpStatus {
    set_error(msg);
    status
}

fn driver_status(e: &DriverError) -> SpStatus {
    match e.stage {
        Stage::Parse => SpStatus::Parse,
        Stage::Io => SpStatus::Io,
        _ => SpStatus::Pipeline,
    }
}

fn guard(f: impl FnOnce() -> SpStatus) -> SpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(SpStatus::Panic, format!("internal error: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, SpStatus> {
    if p.is_null() {
        return Err(fail(SpStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| fail(SpStatus::InvalidUtf8, e))
}

fn give<T>(out: *mut *mut T, v: T) -> SpStatus {
    // SAFETY: callers check `out` for null before computing `v`.
    unsafe { *out = Box::into_raw(Box::new(v)) };
    SpStatus::Ok
}

fn give_string(out: *mut *mut c_char, s: String) -> SpStatus {
    match CString::new(s) {
        Ok(c) => {
            // SAFETY: checked non-null by the caller.
            unsafe { *out = c.into_raw() };
            SpStatus::Ok
        }
        Err(e) => fail(SpStatus::InvalidUtf8, e),
    }
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn sp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static.
#[no_mangle]
pub extern "C" fn sp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a problem file from TOML text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_problem_from_toml(text: *const c_char, out: *mut *mut SpProblem) -> SpStatus {
    guard(|| {
        if out.is_null() {
            return fail(SpStatus::NullArgument, "null output pointer");
        }
        let text = match str_arg(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ProblemFile::from_toml(text) {
            Ok(pf) => give(out, SpProblem(pf)),
            Err(e) => fail(driver_status(&e), e),
        }
    })
}

/// Load one of the built-in cases by name.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_problem_builtin(name: *const c_char, out: *mut *mut SpProblem) -> SpStatus {
    guard(|| {
        if out.is_null() {
            return fail(SpStatus::NullArgument, "null output pointer");
        }
        let name = match str_arg(name) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match builtin(name) {
            Ok(pf) => give(out, SpProblem(pf)),
            Err(e) => fail(driver_status(&e), e),
        }
    })
}

/// # Safety
/// `p` must come from an `sp_problem_*` constructor, or be null.
#[no_mangle]
pub unsafe extern "C" fn sp_problem_free(p: *mut SpProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Run the pipeline; `validate` adds the numeric validation stage.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_run(problem: *const SpProblem, validate: bool, out: *mut *mut SpReport) -> SpStatus {
    sp_run_with(problem, validate, ptr::null(), out)
}

/// [`sp_run`] with overrides; `ov` may be null.
///
/// # Safety
/// As [`sp_run`]; a non-null `ov.eps_ladder` must point to `ov.eps_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sp_run_with(
    problem: *const SpProblem,
    validate: bool,
    ov: *const SpOverrides,
    out: *mut *mut SpReport,
) -> SpStatus {
    guard(|| {
        if problem.is_null() || out.is_null() {
            return fail(SpStatus::NullArgument, "null problem or output pointer");
        }
        let mut o = Overrides::default();
        if let Some(ov) = ov.as_ref() {
            if ov.tol < 0.0 || ov.tol.is_nan() {
                return fail(SpStatus::OutOfRange, format!("tolerance {} must be positive", ov.tol));
            }
            if ov.tol > 0.0 {
                o.tol = Some(ov.tol);
            }
            if !ov.eps_ladder.is_null() && ov.eps_len > 0 {
                o.eps_ladder = Some(std::slice::from_raw_parts(ov.eps_ladder, ov.eps_len).to_vec());
            }
            if ov.ansatz_depth >= 0 {
                o.ansatz_depth = Some(ov.ansatz_depth as u32);
            }
        }
        match run_case(&(*problem).0, &o, validate) {
            Ok(r) => give(out, SpReport(r)),
            Err(e) => fail(driver_status(&e), e),
        }
    })
}

/// # Safety
/// `r` must come from [`sp_run`] or [`sp_run_with`], or be null.
#[no_mangle]
pub unsafe extern "C" fn sp_report_free(r: *mut SpReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Whether every check of the report passed. False for a null handle.
///
/// # Safety
/// `r` must be a live report handle or null.
#[no_mangle]
pub unsafe extern "C" fn sp_report_passed(r: *const SpReport) -> bool {
    r.as_ref().is_some_and(|r| r.0.passed)
}

/// Number of checks, expectation and validation together.
///
/// # Safety
/// `r` must be a live report handle or null.
#[no_mangle]
pub unsafe extern "C" fn sp_report_check_count(r: *const SpReport) -> usize {
    r.as_ref().map_or(0, |r| r.0.all_checks().count())
}

/// Name and outcome of check `index`. The name is a new string to release
/// with [`sp_string_free`].
///
/// # Safety
/// `r` must be a live handle; `name` and `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_report_check(
    r: *const SpReport,
    index: usize,
    name: *mut *mut c_char,
    passed: *mut bool,
) -> SpStatus {
    guard(|| {
        if r.is_null() || name.is_null() || passed.is_null() {
            return fail(SpStatus::NullArgument, "null report or output pointer");
        }
        let Some(c) = (*r).0.all_checks().nth(index) else {
            return fail(SpStatus::OutOfRange, format!("check index {index} out of range"));
        };
        *passed = c.passed;
        give_string(name, c.name.clone())
    })
}

/// The report as JSON; release with [`sp_string_free`].
///
/// # Safety
/// `r` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_report_json(r: *const SpReport, out: *mut *mut c_char) -> SpStatus {
    guard(|| {
        if r.is_null() || out.is_null() {
            return fail(SpStatus::NullArgument, "null report or output pointer");
        }
        give_string(out, (*r).0.to_json())
    })
}

/// Write report.json, solution.txt and, with validation, errors.csv into `dir`.
///
/// # Safety
/// `r` must be a live handle; `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn sp_report_emit(r: *const SpReport, dir: *const c_char) -> SpStatus {
    guard(|| {
        if r.is_null() {
            return fail(SpStatus::NullArgument, "null report");
        }
        let dir = match str_arg(dir) {
            Ok(d) => d,
            Err(s) => return s,
        };
        match emit_report(&(*r).0, Path::new(dir)) {
            Ok(_) => SpStatus::Ok,
            Err(e) => fail(driver_status(&e), e),
        }
    })
}

/// # Safety
/// `s` must be a string returned by this library, or null.
#[no_mangle]
pub unsafe extern "C" fn sp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_error() -> String {
        unsafe { CStr::from_ptr(sp_last_error()) }.to_string_lossy().into_owned()
    }

    #[test]
    fn unknown_builtin_is_a_parse_error() {
        let mut p = ptr::null_mut();
        let s = unsafe { sp_problem_builtin(c"nope".as_ptr(), &mut p) };
        assert_eq!(s, SpStatus::Parse);
        assert!(p.is_null());
        assert!(last_error().contains("boundary_layer"));
    }

    #[test]
    fn null_arguments_are_rejected() {
        let mut p = ptr::null_mut();
        assert_eq!(unsafe { sp_problem_from_toml(ptr::null(), &mut p) }, SpStatus::NullArgument);
        assert_eq!(unsafe { sp_run(ptr::null(), false, ptr::null_mut()) }, SpStatus::NullArgument);
        assert!(!unsafe { sp_report_passed(ptr::null()) });
        unsafe {
            sp_problem_free(ptr::null_mut());
            sp_report_free(ptr::null_mut());
            sp_string_free(ptr::null_mut());
        }
    }

    #[test]
    fn negative_tolerance_is_out_of_range() {
        let mut p = ptr::null_mut();
        unsafe {
            assert_eq!(sp_problem_builtin(c"wkb".as_ptr(), &mut p), SpStatus::Ok);
            let ov = SpOverrides {
                tol: -1.0,
                eps_ladder: ptr::null(),
                eps_len: 0,
                ansatz_depth: -1,
            };
            let mut r = ptr::null_mut();
            assert_eq!(sp_run_with(p, true, &ov, &mut r), SpStatus::OutOfRange);
            sp_problem_free(p);
        }
    }

    #[test]
    fn version_is_the_package_version() {
        let v = unsafe { CStr::from_ptr(sp_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
