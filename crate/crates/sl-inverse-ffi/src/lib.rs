//! C ABI over the spectral toolkit: opaque problem handles, spectrum
//! extraction into caller-owned arrays, and JSON-string based inversion.
//!
//! Error handling: every fallible call returns a status code
//! (0 ok, 2 input error, 3 numerical failure, 4 invalid argument) and
//! stores a message retrievable with `sl_last_error` (thread-local,
//! valid until the next failing call on the same thread).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use sl_inverse::maineq::{invert, InvertOptions, KnownData};
use sl_inverse::spectra::{find_spectrum, points_from_csv, Subspectrum};
use sl_inverse::{Error, ProblemSpec};

pub const SL_OK: i32 = 0;
pub const SL_ERR_INPUT: i32 = 2;
pub const SL_ERR_NUMERICAL: i32 = 3;
pub const SL_ERR_ARGUMENT: i32 = 4;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NUL-free message");
    });
}

fn code_for(e: &Error) -> i32 {
    if e.is_input_error() {
        SL_ERR_INPUT
    } else {
        SL_ERR_NUMERICAL
    }
}

fn store(e: Error) -> i32 {
    set_error(&e.to_string());
    code_for(&e)
}

fn argument_error(message: &str) -> i32 {
    set_error(message);
    SL_ERR_ARGUMENT
}

/// # Safety
/// `ptr` must be a valid NUL-terminated string or null.
unsafe fn read_cstr<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, i32> {
    if ptr.is_null() {
        return Err(argument_error(&format!("{name} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| argument_error(&format!("{name} is not valid UTF-8")))
}

/// Opaque handle to a parsed problem description.
pub struct SlProblem {
    spec: ProblemSpec,
}

/// Message of the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread. Never null.
#[no_mangle]
pub extern "C" fn sl_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parse a problem spec JSON into a handle. On success writes the handle
/// to `out` and returns 0; the handle must be released with
/// `sl_problem_free`.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be a valid
/// pointer to a pointer slot.
#[no_mangle]
pub unsafe extern "C" fn sl_problem_from_json(
    json: *const c_char,
    out: *mut *mut SlProblem,
) -> i32 {
    if out.is_null() {
        return argument_error("out is null");
    }
    let text = match read_cstr(json, "json") {
        Ok(t) => t,
        Err(code) => return code,
    };
    match ProblemSpec::from_json(text) {
        Ok(spec) => {
            *out = Box::into_raw(Box::new(SlProblem { spec }));
            SL_OK
        }
        Err(e) => store(e),
    }
}

/// Release a handle returned by `sl_problem_from_json`. Null is ignored.
///
/// # Safety
/// `problem` must be null or a pointer previously returned by
/// `sl_problem_from_json` that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn sl_problem_free(problem: *mut SlProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Compute the first eigenvalues (counted with multiplicity) of problem
/// B_i and write them into the caller-owned arrays `re`, `im` and
/// `multiplicity`, each of capacity `capacity` entries. The number of
/// distinct entries written goes to `written`.
///
/// # Safety
/// `problem` must be a live handle; the array pointers must reference at
/// least `capacity` elements; `written` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_spectrum(
    problem: *const SlProblem,
    i: u8,
    n_eigs: usize,
    re: *mut f64,
    im: *mut f64,
    multiplicity: *mut u32,
    capacity: usize,
    written: *mut usize,
) -> i32 {
    if problem.is_null() {
        return argument_error("problem is null");
    }
    if re.is_null() || im.is_null() || multiplicity.is_null() || written.is_null() {
        return argument_error("output pointer is null");
    }
    let sub = match find_spectrum(&(*problem).spec, i, n_eigs) {
        Ok(s) => s,
        Err(e) => return store(e),
    };
    if sub.points.len() > capacity {
        return argument_error(&format!(
            "capacity {} is below the {} spectral points",
            capacity,
            sub.points.len()
        ));
    }
    for (k, p) in sub.points.iter().enumerate() {
        *re.add(k) = p.lambda.re;
        *im.add(k) = p.lambda.im;
        *multiplicity.add(k) = p.multiplicity as u32;
    }
    *written = sub.points.len();
    SL_OK
}

/// Reconstruct (q1, h) from known-data JSON and spectrum CSV text. On
/// success writes a NUL-terminated result JSON (release it with
/// `sl_string_free`). `modes` = 0 picks the default trial size; `reg` is
/// the relative singular-value cutoff (pass a negative value for the
/// default); `grid_n` = 0 picks the default grid.
///
/// # Safety
/// `known_json` and `spectrum_csv` must be valid NUL-terminated strings;
/// `out_json` must be a valid pointer slot.
#[no_mangle]
pub unsafe extern "C" fn sl_invert(
    known_json: *const c_char,
    spectrum_csv: *const c_char,
    modes: usize,
    reg: f64,
    grid_n: usize,
    out_json: *mut *mut c_char,
) -> i32 {
    if out_json.is_null() {
        return argument_error("out_json is null");
    }
    let known_text = match read_cstr(known_json, "known_json") {
        Ok(t) => t,
        Err(code) => return code,
    };
    let csv_text = match read_cstr(spectrum_csv, "spectrum_csv") {
        Ok(t) => t,
        Err(code) => return code,
    };
    let run = || -> sl_inverse::Result<String> {
        let known = KnownData::from_json(known_text)?;
        let points = points_from_csv(csv_text)?;
        let (points0, points1): (Vec<_>, Vec<_>) = points.into_iter().partition(|p| p.i == 0);
        let sub0 = Subspectrum::new(0, points0)?;
        let sub1 = Subspectrum::new(1, points1)?;
        let options = InvertOptions {
            modes: if modes == 0 { None } else { Some(modes) },
            reg: if reg < 0.0 { 1e-10 } else { reg },
            grid_n: if grid_n == 0 { 256 } else { grid_n },
        };
        Ok(invert(&known, &sub0, &sub1, &options)?.to_json())
    };
    match run() {
        Ok(json) => {
            let sanitized: String = json.chars().filter(|&c| c != '\0').collect();
            *out_json = CString::new(sanitized).expect("NUL-free JSON").into_raw();
            SL_OK
        }
        Err(e) => store(e),
    }
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a pointer returned by this library that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn sl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
