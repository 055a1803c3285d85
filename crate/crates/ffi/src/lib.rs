//! C interface to `pi01-core`.
//!
//! Scenarios and reports are opaque heap handles owned by the caller and
//! released with their `_free` function. Strings returned to the caller are
//! NUL-terminated and released with [`pi01_string_free`]. Every fallible call
//! returns a [`Pi01Status`]; the message for the most recent failure on the
//! calling thread is available from [`pi01_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pi01_core::bushy::{kappa, ncol};
use pi01_core::code::{selfdelim_decode, selfdelim_encode};
use pi01_core::commands::run_command;
use pi01_core::error::Error;
use pi01_core::report::{Report, Status};
use pi01_core::scenario::{parse_scenario, Scenario};
use pi01_core::strings::BinaryString;

/// Result codes. `Ok` is zero; everything else is a failure.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pi01Status {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    UnknownCommand = 4,
    UnknownName = 5,
    /// The operation rejected its input (domain, precondition, shape, ...).
    InvalidInput = 6,
    /// A size or depth budget was exceeded.
    Resource = 7,
    Internal = 8,
    Panic = 9,
    IndexOutOfRange = 10,
}

/// Status of one report line.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pi01LineStatus {
    Pass = 0,
    Fail = 1,
    Error = 2,
}

/// Parsed scenario file.
pub struct Pi01Scenario(Scenario);

/// Report of one command.
pub struct Pi01Report(Report);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("NUL bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> Pi01Status {
    match err {
        Error::Parse { .. } | Error::Format(_) => Pi01Status::Parse,
        Error::UnknownCommand(_) => Pi01Status::UnknownCommand,
        Error::UnknownName(_) => Pi01Status::UnknownName,
        Error::Resource(_) | Error::Depth(_) => Pi01Status::Resource,
        Error::Internal(_) => Pi01Status::Internal,
        _ => Pi01Status::InvalidInput,
    }
}

fn fail(status: Pi01Status, msg: &str) -> Pi01Status {
    set_error(msg);
    status
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (Pi01Status, String)>) -> Pi01Status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            Pi01Status::Ok
        }
        Ok(Err((status, msg))) => fail(status, &msg),
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(Pi01Status::Panic, &msg)
        }
    }
}

fn lib_err(e: Error) -> (Pi01Status, String) {
    (status_of(&e), e.to_string())
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (Pi01Status, String)> {
    if s.is_null() {
        return Err((Pi01Status::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| (Pi01Status::InvalidUtf8, format!("{what}: {e}")))
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("NUL bytes replaced").into_raw()
}

/// Message for the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn pi01_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pi01_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses scenario text into `*out`.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pi01_scenario_parse(text: *const c_char, out: *mut *mut Pi01Scenario) -> Pi01Status {
    guard(|| {
        if out.is_null() {
            return Err((Pi01Status::NullArgument, "out is null".into()));
        }
        *out = ptr::null_mut();
        let text = read_str(text, "text")?;
        let sc = parse_scenario(text).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(Pi01Scenario(sc)));
        Ok(())
    })
}

/// A scenario with no sections and seed 0.
#[no_mangle]
pub extern "C" fn pi01_scenario_empty() -> *mut Pi01Scenario {
    Box::into_raw(Box::new(Pi01Scenario(Scenario::default())))
}

/// Overrides the scenario seed.
///
/// # Safety
/// `sc` must be null or a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn pi01_scenario_set_seed(sc: *mut Pi01Scenario, seed: u64) -> Pi01Status {
    match sc.as_mut() {
        Some(sc) => {
            sc.0.seed = seed;
            Pi01Status::Ok
        }
        None => fail(Pi01Status::NullArgument, "scenario is null"),
    }
}

/// # Safety
/// `sc` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pi01_scenario_free(sc: *mut Pi01Scenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Runs `cmd` (for example `"check thin --tree T --sub S"`) and stores the
/// report in `*out`. Failing checks still return `Ok`; inspect the report.
///
/// # Safety
/// `sc` must be a live scenario handle, `cmd` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pi01_run(
    sc: *const Pi01Scenario,
    cmd: *const c_char,
    out: *mut *mut Pi01Report,
) -> Pi01Status {
    guard(|| {
        if out.is_null() {
            return Err((Pi01Status::NullArgument, "out is null".into()));
        }
        *out = ptr::null_mut();
        let sc = sc
            .as_ref()
            .ok_or((Pi01Status::NullArgument, "scenario is null".to_string()))?;
        let cmd = read_str(cmd, "command")?;
        let report = run_command(cmd, &sc.0).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(Pi01Report(report)));
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pi01_report_free(r: *mut Pi01Report) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// 1 when every line passed, 0 otherwise (including a null report).
///
/// # Safety
/// `r` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn pi01_report_passed(r: *const Pi01Report) -> i32 {
    r.as_ref().map_or(0, |r| i32::from(r.0.passed()))
}

/// Number of check lines, header excluded.
///
/// # Safety
/// `r` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn pi01_report_line_count(r: *const Pi01Report) -> usize {
    r.as_ref().map_or(0, |r| r.0.lines.len())
}

/// Status of line `i` in `*out`.
///
/// # Safety
/// `r` must be a live report handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pi01_report_line_status(
    r: *const Pi01Report,
    i: usize,
    out: *mut Pi01LineStatus,
) -> Pi01Status {
    let (Some(r), false) = (r.as_ref(), out.is_null()) else {
        return fail(Pi01Status::NullArgument, "report or out is null");
    };
    let Some(line) = r.0.lines.get(i) else {
        return fail(Pi01Status::IndexOutOfRange, &format!("line {i} of {}", r.0.lines.len()));
    };
    *out = match line.status {
        Status::Pass => Pi01LineStatus::Pass,
        Status::Fail => Pi01LineStatus::Fail,
        Status::Error => Pi01LineStatus::Error,
    };
    Pi01Status::Ok
}

/// The full tab-separated report text; free with [`pi01_string_free`].
/// Returns null for a null report.
///
/// # Safety
/// `r` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn pi01_report_text(r: *const Pi01Report) -> *mut c_char {
    match r.as_ref() {
        Some(r) => to_c(r.0.to_string()),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pi01_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Self-delimiting code of `(n, m)` as a string of `0`/`1` (`e` when empty)
/// in `*out`; free with [`pi01_string_free`].
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pi01_selfdelim_encode(n: u64, m: u64, out: *mut *mut c_char) -> Pi01Status {
    guard(|| {
        if out.is_null() {
            return Err((Pi01Status::NullArgument, "out is null".into()));
        }
        *out = ptr::null_mut();
        let code = selfdelim_encode(n, m).map_err(lib_err)?;
        *out = to_c(code.to_string());
        Ok(())
    })
}

/// Inverse of [`pi01_selfdelim_encode`].
///
/// # Safety
/// `code` must be a NUL-terminated string; `n` and `m` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pi01_selfdelim_decode(code: *const c_char, n: *mut u64, m: *mut u64) -> Pi01Status {
    guard(|| {
        if n.is_null() || m.is_null() {
            return Err((Pi01Status::NullArgument, "n or m is null".into()));
        }
        let s: BinaryString = read_str(code, "code")?.parse().map_err(lib_err)?;
        let (a, b) = selfdelim_decode(&s).map_err(lib_err)?;
        *n = a;
        *m = b;
        Ok(())
    })
}

/// Number of colours `2^{i+1}` at bushiness index `i`; 0 if it overflows.
#[no_mangle]
pub extern "C" fn pi01_ncol(i: u32) -> u64 {
    if i >= 63 {
        return 0;
    }
    ncol(i as usize)
}

/// Successor count `κ_i(n)`; 0 if it overflows.
#[no_mangle]
pub extern "C" fn pi01_kappa(i: u32, n: u32) -> u64 {
    if u64::from(n) >= 62 + u64::from(i) {
        return 0;
    }
    kappa(i as usize, n as usize)
}
