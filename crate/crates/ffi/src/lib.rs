//! C ABI over the swarmleak simulator.
//!
//! Objects cross the boundary as opaque pointers created by the `sl_*_from_*`
//! and `sl_run_scenario` constructors and released with the matching
//! `sl_*_free`. Every call returns an [`SlStatus`]; on failure the message
//! is available through [`sl_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::ptr;

use swarmleak::attacks::{mmd, prediction_confidence, prediction_entropy, Bandwidth, MmdConfig};
use swarmleak::harness::{run_scenario, ExperimentReport, ScenarioConfig};
use swarmleak::nn::PredictionVector;
use swarmleak::Error;

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8, or an out-of-range scalar argument.
    InvalidArgument = 1,
    /// Scenario JSON failed to parse or validate.
    Config = 2,
    /// The computation itself failed.
    Runtime = 3,
    /// A Rust panic was caught at the boundary.
    Panic = 4,
}

/// Parsed and validated scenario.
pub struct SlScenario {
    config: ScenarioConfig,
}

/// Report of a finished run.
pub struct SlReport {
    report: ExperimentReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    let c = CString::new(text).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: SlStatus, msg: impl Into<String>) -> SlStatus {
    set_error(msg);
    status
}

fn classify(err: &Error) -> SlStatus {
    match err {
        Error::Config { .. } | Error::Json(_) => SlStatus::Config,
        Error::Argument(_) => SlStatus::InvalidArgument,
        _ => SlStatus::Runtime,
    }
}

fn from_error(err: Error) -> SlStatus {
    let status = classify(&err);
    fail(status, err.to_string())
}

fn guard<F: FnOnce() -> SlStatus + UnwindSafe>(f: F) -> SlStatus {
    match catch_unwind(f) {
        Ok(status) => {
            if status == SlStatus::Ok {
                set_error("");
            }
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            fail(SlStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, SlStatus> {
    if p.is_null() {
        return Err(fail(SlStatus::InvalidArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(SlStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// `rows * cols` row-major probabilities into prediction vectors.
unsafe fn read_predictions(
    data: *const f64,
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<Vec<PredictionVector>, SlStatus> {
    if data.is_null() {
        return Err(fail(SlStatus::InvalidArgument, format!("{what} is null")));
    }
    let len =
        rows.checked_mul(cols).ok_or_else(|| fail(SlStatus::InvalidArgument, format!("{what} size overflows")))?;
    let flat = std::slice::from_raw_parts(data, len);
    flat.chunks(cols.max(1))
        .take(rows)
        .map(|row| PredictionVector::new(row.to_vec()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(from_error)
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL,
/// so a caller can size a second attempt.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sl_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Parses and validates a scenario from JSON text. Relative dataset paths
/// are resolved against the process working directory.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_scenario_from_json(json: *const c_char, out: *mut *mut SlScenario) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::InvalidArgument, "out is null");
        }
        *out = ptr::null_mut();
        let text = match read_str(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let config = match ScenarioConfig::from_json(text).and_then(|c| c.validate().map(|_| c)) {
            Ok(c) => c,
            Err(e) => return from_error(e),
        };
        *out = Box::into_raw(Box::new(SlScenario { config }));
        SlStatus::Ok
    })
}

/// Loads a scenario file; relative paths inside resolve against its directory.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_scenario_from_path(path: *const c_char, out: *mut *mut SlScenario) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::InvalidArgument, "out is null");
        }
        *out = ptr::null_mut();
        let path = match read_str(path, "path") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let config = match ScenarioConfig::from_path(std::path::Path::new(path)).and_then(|c| c.validate().map(|_| c)) {
            Ok(c) => c,
            Err(e) => return from_error(e),
        };
        *out = Box::into_raw(Box::new(SlScenario { config }));
        SlStatus::Ok
    })
}

/// # Safety
/// `scenario` must be null or a pointer from `sl_scenario_from_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_scenario_free(scenario: *mut SlScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the full pipeline. Blocks until the run finishes.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_run_scenario(scenario: *const SlScenario, out: *mut *mut SlReport) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::InvalidArgument, "out is null");
        }
        *out = ptr::null_mut();
        let Some(scenario) = scenario.as_ref() else {
            return fail(SlStatus::InvalidArgument, "scenario is null");
        };
        match run_scenario(&scenario.config) {
            Ok(outcome) => {
                *out = Box::into_raw(Box::new(SlReport { report: outcome.report }));
                SlStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Headline numbers of a report. Any output pointer may be null.
///
/// # Safety
/// `report` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_report_metrics(
    report: *const SlReport,
    accuracy: *mut f64,
    macro_f1: *mut f64,
    baseline: *mut f64,
) -> SlStatus {
    guard(|| {
        let Some(r) = report.as_ref() else {
            return fail(SlStatus::InvalidArgument, "report is null");
        };
        let m = &r.report.metrics;
        for (dst, v) in [(accuracy, m.accuracy), (macro_f1, m.macro_f1), (baseline, m.baseline)] {
            if !dst.is_null() {
                *dst = v;
            }
        }
        SlStatus::Ok
    })
}

/// Serializes the report. `canonical != 0` zeroes the wall clock so two runs
/// of one scenario compare byte for byte. Free the string with
/// [`sl_string_free`].
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_report_to_json(report: *const SlReport, canonical: i32, out: *mut *mut c_char) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::InvalidArgument, "out is null");
        }
        *out = ptr::null_mut();
        let Some(r) = report.as_ref() else {
            return fail(SlStatus::InvalidArgument, "report is null");
        };
        let text = if canonical != 0 { r.report.canonical_json() } else { r.report.to_json() };
        match text.map(CString::new) {
            Ok(Ok(c)) => {
                *out = c.into_raw();
                SlStatus::Ok
            }
            Ok(Err(_)) => fail(SlStatus::Runtime, "report contains a NUL byte"),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `report` must be null or a handle from [`sl_run_scenario`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_report_free(report: *mut SlReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// MMD between two row-major sets of probability vectors with `cols`
/// entries each. `sigma <= 0` selects the median heuristic.
///
/// # Safety
/// `a` must hold `a_rows * cols` values, `b` must hold `b_rows * cols`, and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_mmd(
    a: *const f64,
    a_rows: usize,
    b: *const f64,
    b_rows: usize,
    cols: usize,
    sigma: f64,
    kernel_exponent: u8,
    out: *mut f64,
) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::InvalidArgument, "out is null");
        }
        if cols == 0 {
            return fail(SlStatus::InvalidArgument, "cols must be positive");
        }
        let a = match read_predictions(a, a_rows, cols, "a") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let b = match read_predictions(b, b_rows, cols, "b") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let cfg = MmdConfig {
            sigma: if sigma > 0.0 { Bandwidth::Fixed(sigma) } else { Bandwidth::MedianHeuristic },
            kernel_exponent,
        };
        match mmd(&a, &b, &cfg) {
            Ok(d) => {
                *out = d;
                SlStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

unsafe fn scalar_stat(probs: *const f64, len: usize, out: *mut f64, f: fn(&PredictionVector) -> f64) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::InvalidArgument, "out is null");
        }
        if len == 0 {
            return fail(SlStatus::InvalidArgument, "len must be positive");
        }
        match read_predictions(probs, 1, len, "probs") {
            Ok(v) => {
                *out = f(&v[0]);
                SlStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Shannon entropy (nats) of one probability vector.
///
/// # Safety
/// `probs` must hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_prediction_entropy(probs: *const f64, len: usize, out: *mut f64) -> SlStatus {
    scalar_stat(probs, len, out, prediction_entropy)
}

/// Largest entry of one probability vector.
///
/// # Safety
/// `probs` must hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_prediction_confidence(probs: *const f64, len: usize, out: *mut f64) -> SlStatus {
    scalar_stat(probs, len, out, prediction_confidence)
}
