//! C ABI over the `zerosum` library.
//!
//! Scenarios cross the boundary as an opaque `ZsScenario*` created by
//! `zs_scenario_new` or `zs_scenario_from_json` and released with
//! `zs_scenario_free`. Every other call returns a `ZsStatus`; on failure
//! `zs_last_error()` gives a message for the calling thread. Output arrays
//! are caller-allocated and their lengths are checked.
//!
//! Matrices are row-major. Plan order is the order of the shares array.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use zerosum::{
    build_full_covariance, cross_covariances, effective_caps, focal_variance, focal_variance_gradient,
    implied_mean, summarize, validate_scenario, Distribution, Error, RawScenario, Scenario,
};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZsStatus {
    Ok = 0,
    NullPointer = 1,
    Shares = 2,
    Dimension = 3,
    Covariance = 4,
    Value = 5,
    Index = 6,
    Parse = 7,
    BufferSize = 8,
    Numerical = 9,
    Factorization = 10,
    SearchExhausted = 11,
    Internal = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZsDistribution {
    Normal = 0,
    ShiftedExp = 1,
}

/// Opaque validated scenario.
pub struct ZsScenario {
    inner: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ZsStatus {
    match e {
        Error::Share(_) => ZsStatus::Shares,
        Error::Dimension(_) => ZsStatus::Dimension,
        Error::Covariance(_) => ZsStatus::Covariance,
        Error::Value(_) | Error::Grid(_) | Error::Io(_) => ZsStatus::Value,
        Error::Index(_) => ZsStatus::Index,
        Error::Parse(_) => ZsStatus::Parse,
        Error::Numerical(_) => ZsStatus::Numerical,
        Error::Factorization(_) => ZsStatus::Factorization,
        Error::SearchExhausted { .. } => ZsStatus::SearchExhausted,
    }
}

enum Failure {
    Status(ZsStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ZsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ZsStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_last_error(msg);
            s
        }
        Err(_) => {
            set_last_error("internal panic".into());
            ZsStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(ZsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn scenario_ref<'a>(sc: *const ZsScenario) -> Result<&'a Scenario, Failure> {
    sc.as_ref().map(|s| &s.inner).ok_or_else(|| null("scenario"))
}

unsafe fn out_slice<'a>(ptr: *mut f64, len: usize, needed: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    if len < needed {
        return Err(Failure::Status(
            ZsStatus::BufferSize,
            format!("{what} holds {len} values, need {needed}"),
        ));
    }
    Ok(slice::from_raw_parts_mut(ptr, needed))
}

unsafe fn write_out<T>(ptr: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    ptr.write(value);
    Ok(())
}

fn boxed(sc: Scenario) -> *mut ZsScenario {
    Box::into_raw(Box::new(ZsScenario { inner: sc }))
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn zs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a scenario from `n` shares and the `(n-1) x (n-1)` base covariance.
/// `means` (length `n-1`) may be NULL for zero means. `focal_index < 0`
/// selects the last plan.
#[no_mangle]
pub unsafe extern "C" fn zs_scenario_new(
    shares: *const f64,
    n: usize,
    lambda: *const f64,
    means: *const f64,
    focal_index: isize,
    out: *mut *mut ZsScenario,
) -> ZsStatus {
    guard(|| {
        if shares.is_null() || lambda.is_null() {
            return Err(null("shares or lambda"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        if n < 2 {
            return Err(Error::Share(format!("need at least 2 plans, got {n}")).into());
        }
        let k = n - 1;
        let lam = slice::from_raw_parts(lambda, k * k);
        let raw = RawScenario {
            label: String::new(),
            shares: slice::from_raw_parts(shares, n).to_vec(),
            lambda: Some(lam.chunks_exact(k).map(<[f64]>::to_vec).collect()),
            means: (!means.is_null()).then(|| slice::from_raw_parts(means, k).to_vec()),
            caps: None,
            focal_index: usize::try_from(focal_index).ok(),
        };
        let sc = validate_scenario(&raw)?;
        out.write(boxed(sc));
        Ok(())
    })
}

/// Parses and validates a NUL-terminated scenario JSON document.
#[no_mangle]
pub unsafe extern "C" fn zs_scenario_from_json(json: *const c_char, out: *mut *mut ZsScenario) -> ZsStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Error::Parse(e.to_string()))?;
        let raw: RawScenario = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        out.write(boxed(validate_scenario(&raw)?));
        Ok(())
    })
}

/// Releases a scenario. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn zs_scenario_free(sc: *mut ZsScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Number of plans, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn zs_scenario_plan_count(sc: *const ZsScenario) -> usize {
    sc.as_ref().map_or(0, |s| s.inner.plan_count())
}

#[no_mangle]
pub unsafe extern "C" fn zs_implied_mean(sc: *const ZsScenario, out: *mut f64) -> ZsStatus {
    guard(|| {
        let s = scenario_ref(sc)?;
        write_out(out, implied_mean(&s.shares, &s.means)?, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn zs_focal_variance(sc: *const ZsScenario, out: *mut f64) -> ZsStatus {
    guard(|| {
        let s = scenario_ref(sc)?;
        write_out(out, focal_variance(&s.shares, &s.lambda)?, "out")
    })
}

/// Writes the `n-1` covariances between non-focal plans and the focal plan.
#[no_mangle]
pub unsafe extern "C" fn zs_cross_covariances(sc: *const ZsScenario, out: *mut f64, len: usize) -> ZsStatus {
    guard(|| {
        let s = scenario_ref(sc)?;
        let v = cross_covariances(&s.shares, &s.lambda)?;
        out_slice(out, len, v.len(), "out")?.copy_from_slice(&v);
        Ok(())
    })
}

/// Writes the full `n x n` covariance, row-major, into `out` (`len >= n*n`).
#[no_mangle]
pub unsafe extern "C" fn zs_full_covariance(sc: *const ZsScenario, out: *mut f64, len: usize) -> ZsStatus {
    guard(|| {
        let s = scenario_ref(sc)?;
        let full = build_full_covariance(&s.shares, &s.lambda)?;
        out_slice(out, len, full.as_slice().len(), "out")?.copy_from_slice(full.as_slice());
        Ok(())
    })
}

/// Gradient of the focal variance and per-plan slack, each of length `n-1`.
#[no_mangle]
pub unsafe extern "C" fn zs_focal_variance_gradient(
    sc: *const ZsScenario,
    gradient: *mut f64,
    slack: *mut f64,
    len: usize,
    prop2_satisfied: *mut bool,
) -> ZsStatus {
    guard(|| {
        let s = scenario_ref(sc)?;
        let r = focal_variance_gradient(&s.shares, &s.lambda)?;
        out_slice(gradient, len, r.gradient.len(), "gradient")?.copy_from_slice(&r.gradient);
        out_slice(slack, len, r.slack.len(), "slack")?.copy_from_slice(&r.slack);
        write_out(prop2_satisfied, r.prop2_satisfied, "prop2_satisfied")
    })
}

/// Effective caps for `n` nominal caps; `binding` receives 0/1 flags.
#[no_mangle]
pub unsafe extern "C" fn zs_effective_caps(
    sc: *const ZsScenario,
    nominal: *const f64,
    len: usize,
    effective: *mut f64,
    binding: *mut bool,
) -> ZsStatus {
    guard(|| {
        let s = scenario_ref(sc)?;
        if nominal.is_null() || binding.is_null() {
            return Err(null("nominal or binding"));
        }
        let r = effective_caps(&s.shares, slice::from_raw_parts(nominal, len))?;
        out_slice(effective, len, r.effective_caps.len(), "effective")?.copy_from_slice(&r.effective_caps);
        slice::from_raw_parts_mut(binding, r.binding.len()).copy_from_slice(&r.binding);
        Ok(())
    })
}

/// Monte Carlo summary: empirical means (`n`), covariance (`n*n`, row-major)
/// and the largest relative zero-sum violation over all draws. `dist` is a
/// `ZsDistribution` value.
#[no_mangle]
pub unsafe extern "C" fn zs_simulate(
    sc: *const ZsScenario,
    draws: u64,
    seed: u64,
    dist: u32,
    means: *mut f64,
    means_len: usize,
    covariance: *mut f64,
    covariance_len: usize,
    max_violation: *mut f64,
) -> ZsStatus {
    guard(|| {
        let s = scenario_ref(sc)?;
        let dist = match dist {
            d if d == ZsDistribution::Normal as u32 => Distribution::Normal,
            d if d == ZsDistribution::ShiftedExp as u32 => Distribution::ShiftedExp,
            other => return Err(Error::Value(format!("unknown distribution code {other}")).into()),
        };
        let n = s.plan_count();
        let m = out_slice(means, means_len, n, "means")?;
        let c = out_slice(covariance, covariance_len, n * n, "covariance")?;
        let summary = summarize(s, draws, seed, dist)?;
        m.copy_from_slice(&summary.empirical_means);
        c.copy_from_slice(&summary.empirical_covariance.concat());
        write_out(max_violation, summary.max_zero_sum_violation, "max_violation")
    })
}

/// Full analysis report as a JSON string; release with `zs_string_free`.
#[no_mangle]
pub unsafe extern "C" fn zs_analyze_json(sc: *const ZsScenario, out: *mut *mut c_char) -> ZsStatus {
    guard(|| {
        let s = scenario_ref(sc)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = zerosum::io::to_json(&zerosum::io::analyze(s)?)?;
        let c = CString::new(json).map_err(|e| Error::Value(e.to_string()))?;
        out.write(c.into_raw());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn zs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
