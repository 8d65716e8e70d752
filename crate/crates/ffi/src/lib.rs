//! C ABI over the `loora` estimators.
//!
//! Conventions:
//!
//! * Every fallible function returns a [`LooraStatus`]; results go through out-pointers.
//! * On failure a message is stored per thread and can be read with
//!   [`loora_last_error`]; numeric failures tied to a unit also record its row.
//! * Matrices are row-major `n x k` arrays of `double`.
//! * Handles are opaque. Free them with the matching `_free` function; passing
//!   `NULL` to a free function is a no-op.
//! * Panics never cross the boundary; they surface as `LOORA_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use loora::design::DesignSpec;
use loora::estimators::{EstimatorId, LambdaRule, ObservedSample};
use loora::inference::estimate_report;
use loora::linalg::DesignMatrix;
use loora::oracle::{loora_dm_variance, loora_ht_variance, DmVarianceOptions, Population};
use loora::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LooraStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    SpecMismatch = 3,
    Numeric = 4,
    TooLarge = 5,
    Panic = 6,
}

pub const LOORA_METHOD_HT: u32 = 0;
pub const LOORA_METHOD_DM: u32 = 1;
pub const LOORA_METHOD_ADJ: u32 = 2;
pub const LOORA_METHOD_INT: u32 = 3;
pub const LOORA_METHOD_RIDGE_REG: u32 = 4;
pub const LOORA_METHOD_LOORA_HT: u32 = 5;
pub const LOORA_METHOD_LOORA_DM: u32 = 6;

/// `lambda_value` is the penalty itself.
pub const LOORA_LAMBDA_FIXED: u32 = 0;
/// `lambda_value` is `c` in `lambda = c * max_i ||x_i||^2`.
pub const LOORA_LAMBDA_AUTO: u32 = 1;

/// Point estimate with its HC0 variance and normal interval.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LooraEstimate {
    pub tau_hat: f64,
    pub var_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub lambda_used: f64,
}

/// Observed experiment: covariates, outcomes, assignment and design.
pub struct LooraSample {
    inner: ObservedSample,
}

/// Finite population with both potential outcomes.
pub struct LooraPopulation {
    inner: Population,
}

struct LastError {
    message: CString,
    row: i64,
}

thread_local! {
    static LAST_ERROR: RefCell<LastError> = RefCell::new(LastError { message: CString::default(), row: -1 });
}

fn set_error(message: &str, row: Option<usize>) {
    let message = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = LastError {
            message,
            row: row.map_or(-1, |r| r as i64),
        }
    });
}

fn clear_error() {
    set_error("", None);
}

fn status_of(e: &Error) -> LooraStatus {
    match e {
        Error::InvalidInput(_) | Error::InvalidSpec(_) | Error::ParameterOutOfRange(_) => LooraStatus::InvalidInput,
        Error::SpecMismatch { .. } => LooraStatus::SpecMismatch,
        Error::TooLarge { .. } => LooraStatus::TooLarge,
        Error::RankDeficient | Error::LeverageSingular { .. } | Error::Degenerate(_) => LooraStatus::Numeric,
    }
}

struct Fail(LooraStatus, String, Option<usize>);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string(), e.row())
    }
}

fn null(what: &str) -> Fail {
    Fail(LooraStatus::NullPointer, format!("{what} is NULL"), None)
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> LooraStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LooraStatus::Ok,
        Ok(Err(Fail(status, msg, row))) => {
            set_error(&msg, row);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("internal panic: {msg}"), None);
            LooraStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be NULL or point to `len` readable values.
unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn matrix(x: *const f64, n: usize, k: usize) -> Result<DesignMatrix, Fail> {
    let len = n.checked_mul(k).ok_or_else(|| Fail(LooraStatus::InvalidInput, "n * k overflows".into(), None))?;
    Ok(DesignMatrix::from_row_major(n, k, slice(x, len, "x")?)?)
}

unsafe fn assignment(d: *const u8, n: usize) -> Result<Vec<bool>, Fail> {
    slice(d, n, "d")?
        .iter()
        .enumerate()
        .map(|(i, &v)| match v {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Fail(LooraStatus::InvalidInput, format!("d[{i}] = {other}, expected 0 or 1"), Some(i))),
        })
        .collect()
}

fn method(id: u32) -> Result<EstimatorId, Fail> {
    EstimatorId::ALL
        .get(id as usize)
        .copied()
        .ok_or_else(|| Fail(LooraStatus::InvalidInput, format!("unknown method code {id}"), None))
}

fn lambda_rule(kind: u32, value: f64) -> Result<LambdaRule, Fail> {
    let rule = match kind {
        LOORA_LAMBDA_FIXED => LambdaRule::Fixed(value),
        LOORA_LAMBDA_AUTO => LambdaRule::Auto(value),
        other => return Err(Fail(LooraStatus::InvalidInput, format!("unknown lambda kind {other}"), None)),
    };
    if !value.is_finite() || value < 0.0 {
        return Err(Fail(LooraStatus::InvalidInput, format!("lambda value {value} must be finite and >= 0"), None));
    }
    Ok(rule)
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn new_sample(x: *const f64, n: usize, k: usize, y: *const f64, d: *const u8, spec: impl FnOnce(&[bool]) -> Result<DesignSpec, Fail>, out: *mut *mut LooraSample) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    let x = matrix(x, n, k)?;
    let y = slice(y, n, "y")?.to_vec();
    let d = assignment(d, n)?;
    let spec = spec(&d)?;
    let inner = ObservedSample::from_d(x, y, d, spec)?;
    out.write(Box::into_raw(Box::new(LooraSample { inner })));
    Ok(())
}

/// Observed sample under simple random assignment with per-unit probabilities `p`.
///
/// # Safety
/// `x` holds `n * k` doubles, `y` and `p` hold `n` doubles, `d` holds `n` bytes
/// (0 or 1), and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn loora_sample_new_simple(
    x: *const f64,
    n: usize,
    k: usize,
    y: *const f64,
    d: *const u8,
    p: *const f64,
    out: *mut *mut LooraSample,
) -> LooraStatus {
    guard(|| new_sample(x, n, k, y, d, |_| Ok(DesignSpec::simple(slice(p, n, "p")?.to_vec())?), out))
}

/// Observed sample under complete random assignment; the treated count is taken from `d`.
///
/// # Safety
/// As for [`loora_sample_new_simple`], without `p`.
#[no_mangle]
pub unsafe extern "C" fn loora_sample_new_complete(
    x: *const f64,
    n: usize,
    k: usize,
    y: *const f64,
    d: *const u8,
    out: *mut *mut LooraSample,
) -> LooraStatus {
    guard(|| {
        new_sample(
            x,
            n,
            k,
            y,
            d,
            |d| Ok(DesignSpec::complete(d.len(), d.iter().filter(|b| **b).count())?),
            out,
        )
    })
}

/// # Safety
/// `s` is NULL or a handle from a `loora_sample_new_*` function not yet freed.
#[no_mangle]
pub unsafe extern "C" fn loora_sample_free(s: *mut LooraSample) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Estimate, HC0 variance and confidence interval for one method.
///
/// # Safety
/// `s` is a live sample handle and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn loora_estimate(
    s: *const LooraSample,
    method_code: u32,
    lambda_kind: u32,
    lambda_value: f64,
    level: f64,
    out: *mut LooraEstimate,
) -> LooraStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("sample"))?;
        let id = method(method_code)?;
        let rule = lambda_rule(lambda_kind, lambda_value)?;
        let r = estimate_report(&s.inner, id, rule, level)?;
        put(
            out,
            LooraEstimate {
                tau_hat: r.tau_hat,
                var_hat: r.var_hat,
                ci_low: r.ci_low,
                ci_high: r.ci_high,
                level: r.level,
                lambda_used: r.lambda_used,
            },
            "out",
        )
    })
}

/// # Safety
/// `x` holds `n * k` doubles, `y1` and `y0` hold `n` doubles, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn loora_population_new(
    x: *const f64,
    n: usize,
    k: usize,
    y1: *const f64,
    y0: *const f64,
    out: *mut *mut LooraPopulation,
) -> LooraStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Population::new(matrix(x, n, k)?, slice(y1, n, "y1")?.to_vec(), slice(y0, n, "y0")?.to_vec())?;
        out.write(Box::into_raw(Box::new(LooraPopulation { inner })));
        Ok(())
    })
}

/// # Safety
/// `pop` is NULL or a live population handle.
#[no_mangle]
pub unsafe extern "C" fn loora_population_free(pop: *mut LooraPopulation) {
    if !pop.is_null() {
        drop(Box::from_raw(pop));
    }
}

/// # Safety
/// `pop` is a live population handle, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn loora_population_tau(pop: *const LooraPopulation, out: *mut f64) -> LooraStatus {
    guard(|| {
        let pop = pop.as_ref().ok_or_else(|| null("population"))?;
        put(out, pop.inner.tau(), "out")
    })
}

/// Exact variance of LOORA-HT at penalty `lambda` under probabilities `p`.
///
/// # Safety
/// `pop` is a live population handle, `p` holds `n` doubles, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn loora_ht_exact_variance(pop: *const LooraPopulation, p: *const f64, lambda: f64, out: *mut f64) -> LooraStatus {
    guard(|| {
        let pop = pop.as_ref().ok_or_else(|| null("population"))?;
        let p = slice(p, pop.inner.n(), "p")?;
        put(out, loora_ht_variance(&pop.inner, p, lambda)?, "out")
    })
}

/// Exact variance of LOORA-DM at penalty `lambda` with `n_t` treated units.
///
/// # Safety
/// `pop` is a live population handle, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn loora_dm_exact_variance(pop: *const LooraPopulation, n_t: usize, lambda: f64, out: *mut f64) -> LooraStatus {
    guard(|| {
        let pop = pop.as_ref().ok_or_else(|| null("population"))?;
        put(out, loora_dm_variance(&pop.inner, n_t, lambda, DmVarianceOptions::default())?, "out")
    })
}

/// Message of the last failure on this thread; empty after a success.
///
/// The pointer stays valid until the next `loora_*` call on the same thread.
#[no_mangle]
pub extern "C" fn loora_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().message.as_ptr())
}

/// Row index attached to the last failure on this thread, or -1.
#[no_mangle]
pub extern "C" fn loora_last_error_row() -> i64 {
    LAST_ERROR.with(|e| e.borrow().row)
}

static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn loora_version() -> *const c_char {
    VERSION.as_ptr().cast()
}
