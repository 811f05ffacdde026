//! C ABI over the `freeito` engine.
//!
//! Every fallible call returns a [`FreeitoStatus`]; on failure the message is
//! available from [`freeito_last_error`] on the same thread. Objects cross the
//! boundary as opaque handles that must be released with their `_free`
//! function. Strings returned by the library are freed with
//! [`freeito_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use freeito::cumulants::{self, CumulantSequence};
use freeito::step::StepFunction;
use freeito::{partitions, rational, scalar, transforms, Error};
use num_complex::Complex64;

/// Result codes; `FREEITO_STATUS_OK` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeitoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Validation = 3,
    Size = 4,
    Truncation = 5,
    Domain = 6,
    Regime = 7,
    Numerical = 8,
    Calibration = 9,
    Dimension = 10,
    Contract = 11,
    Parse = 12,
    Panic = 13,
}

impl From<&Error> for FreeitoStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Validation(_) => FreeitoStatus::Validation,
            Error::Size(_) => FreeitoStatus::Size,
            Error::Truncation { .. } => FreeitoStatus::Truncation,
            Error::Domain(_) => FreeitoStatus::Domain,
            Error::Regime { .. } => FreeitoStatus::Regime,
            Error::Numerical { .. } => FreeitoStatus::Numerical,
            Error::Calibration(_) => FreeitoStatus::Calibration,
            Error::Dimension { .. } => FreeitoStatus::Dimension,
            Error::Contract(_) => FreeitoStatus::Contract,
            Error::Parse(_) => FreeitoStatus::Parse,
        }
    }
}

/// A free cumulant sequence.
pub struct FreeitoCumulants(CumulantSequence);

/// A compactly supported step function.
pub struct FreeitoStepFunction(StepFunction);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(FreeitoStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure((&e).into(), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FreeitoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FreeitoStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            FreeitoStatus::Panic
        }
    }
}

fn null() -> Failure {
    Failure(FreeitoStatus::NullPointer, "null pointer argument".into())
}

/// # Safety
/// `s` is null or a NUL-terminated string.
unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null());
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        Failure(
            FreeitoStatus::InvalidUtf8,
            "string is not valid UTF-8".into(),
        )
    })
}

/// # Safety
/// `out` is null or valid for a write.
unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    out.write(value);
    Ok(())
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn freeito_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn freeito_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` is null or was returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn freeito_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `|NC(n)|`, the Catalan number `C_n`, by enumeration.
///
/// # Safety
/// `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn freeito_count_noncrossing(n: usize, out: *mut u64) -> FreeitoStatus {
    guard(|| put(out, partitions::count_noncrossing(n)?))
}

/// Catalog law by name (`semicircular`, `free_poisson:<rate>`, ...), truncated at `order`.
///
/// # Safety
/// `name` is a NUL-terminated string; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn freeito_cumulants_catalog(
    name: *const c_char,
    order: usize,
    out: *mut *mut FreeitoCumulants,
) -> FreeitoStatus {
    guard(|| {
        let r = cumulants::catalog(text(name)?, order)?;
        put(out, Box::into_raw(Box::new(FreeitoCumulants(r))))
    })
}

/// Cumulant sequence from JSON `{"kind": ..., "values": ["p/q", ...]}`.
///
/// # Safety
/// `json` is a NUL-terminated string; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn freeito_cumulants_from_json(
    json: *const c_char,
    out: *mut *mut FreeitoCumulants,
) -> FreeitoStatus {
    guard(|| {
        let r = CumulantSequence::from_json(text(json)?)?;
        put(out, Box::into_raw(Box::new(FreeitoCumulants(r))))
    })
}

/// # Safety
/// `r` is null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn freeito_cumulants_free(r: *mut FreeitoCumulants) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Moments `m_1..m_n` as doubles into `out[0..n]`.
///
/// # Safety
/// `r` is a live handle; `out` has room for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn freeito_moments(
    r: *const FreeitoCumulants,
    n: usize,
    out: *mut f64,
) -> FreeitoStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let m = cumulants::moments_from_cumulants(&r.0, n)?;
        for (i, v) in m.to_f64().into_iter().enumerate() {
            out.add(i).write(v);
        }
        Ok(())
    })
}

/// Exact moments `m_1..m_n` as a JSON array of `"p/q"` strings; free the
/// result with [`freeito_string_free`].
///
/// # Safety
/// `r` is a live handle; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn freeito_moments_exact(
    r: *const FreeitoCumulants,
    n: usize,
    out: *mut *mut c_char,
) -> FreeitoStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(null)?;
        let m = cumulants::moments_from_cumulants(&r.0, n)?;
        let strings: Vec<String> = m.values().iter().map(rational::format).collect();
        put(
            out,
            into_c_string(serde_json::to_string(&strings).expect("strings serialize")),
        )
    })
}

/// Density of `mu_t` at `x` by Stieltjes inversion at height `eps`.
///
/// # Safety
/// `r` is a live handle; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn freeito_density(
    r: *const FreeitoCumulants,
    t: f64,
    x: f64,
    eps: f64,
    out: *mut f64,
) -> FreeitoStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(null)?;
        let t = rational::from_f64(t)?;
        let law = cumulants::semigroup_cumulants(&r.0, &t)?;
        put(out, transforms::density(&law, x, eps)?)
    })
}

/// Cauchy transform `G(z)` of the law, written as `out[0] + i out[1]`.
///
/// # Safety
/// `r` is a live handle; `out` has room for 2 doubles.
#[no_mangle]
pub unsafe extern "C" fn freeito_cauchy(
    r: *const FreeitoCumulants,
    re: f64,
    im: f64,
    out: *mut f64,
) -> FreeitoStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let g = transforms::cauchy_numeric(&r.0, Complex64::new(re, im))?;
        out.write(g.re);
        out.add(1).write(g.im);
        Ok(())
    })
}

/// Step function from JSON `{"breakpoints": [...], "values": [...]}`.
///
/// # Safety
/// `json` is a NUL-terminated string; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn freeito_step_from_json(
    json: *const c_char,
    out: *mut *mut FreeitoStepFunction,
) -> FreeitoStatus {
    guard(|| {
        let f = StepFunction::from_json(text(json)?)?;
        put(out, Box::into_raw(Box::new(FreeitoStepFunction(f))))
    })
}

/// # Safety
/// `f` is null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn freeito_step_free(f: *mut FreeitoStepFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// `||f||_{n,mu}`.
///
/// # Safety
/// `f` and `r` are live handles; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn freeito_mu_norm(
    f: *const FreeitoStepFunction,
    r: *const FreeitoCumulants,
    n: usize,
    out: *mut f64,
) -> FreeitoStatus {
    guard(|| {
        let (f, r) = (f.as_ref().ok_or_else(null)?, r.as_ref().ok_or_else(null)?);
        put(out, scalar::mu_norm(&f.0, &r.0, n)?)
    })
}

/// Runs a named check on a config in the CLI `verify` format. The report
/// JSON goes to `report` (free with [`freeito_string_free`]) and the verdict
/// to `pass`.
///
/// # Safety
/// `check` and `config` are NUL-terminated strings; `report` and `pass` are
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn freeito_verify(
    check: *const c_char,
    config: *const c_char,
    report: *mut *mut c_char,
    pass: *mut bool,
) -> FreeitoStatus {
    guard(|| {
        if report.is_null() || pass.is_null() {
            return Err(null());
        }
        let (json, ok) = freeito::cli::verify_text(text(check)?, text(config)?)?;
        put(report, into_c_string(json))?;
        put(pass, ok)
    })
}
