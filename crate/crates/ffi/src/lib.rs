//! C interface to `karlin-core`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`-style
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`KarlinStatus`]; on failure the message is available from
//! [`karlin_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use karlin_core::analytic::{solve_normalizer, NormalizerContext, NormalizerKind, Regime};
use karlin_core::geometry::UnitBox;
use karlin_core::karlin_process::{empirical_sup_measure, simulate_path, LabeledPath, ModelParams};
use karlin_core::verify::{run_suite, ExperimentConfig, VerificationReport};
use karlin_core::{Error, RngStream};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KarlinStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parameter = 3,
    Resource = 4,
    Config = 5,
    Io = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KarlinRegime {
    Noise = 0,
    Signal = 1,
    Critical = 2,
}

/// Perturbed Karlin model with Pareto signal and noise.
pub struct KarlinModel(ModelParams);

/// A simulated path.
pub struct KarlinPath(LabeledPath);

/// A verification report.
pub struct KarlinReport(VerificationReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> KarlinStatus {
    match e {
        Error::Domain(_) | Error::MalformedBox(_) | Error::LengthMismatch(_) | Error::EmptySample => {
            KarlinStatus::InvalidArgument
        }
        Error::Parameter(_) | Error::Environment(_) | Error::CertificateViolation { .. } => KarlinStatus::Parameter,
        Error::Resource { .. } => KarlinStatus::Resource,
        Error::Config(_) | Error::Json(_) => KarlinStatus::Config,
        Error::Io(_) => KarlinStatus::Io,
        Error::Bracketing(_) | Error::Internal(_) => KarlinStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (KarlinStatus, String)>) -> KarlinStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KarlinStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("panic inside karlin".into());
            KarlinStatus::Internal
        }
    }
}

fn core<T>(r: karlin_core::Result<T>) -> Result<T, (KarlinStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (KarlinStatus, String) {
    (KarlinStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (KarlinStatus, String) {
    (KarlinStatus::InvalidArgument, msg.into())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (KarlinStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), (KarlinStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(v);
    Ok(())
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (KarlinStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn karlin_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Owned by the
/// library; valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn karlin_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from a function documented as returning an owned string and
/// must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn karlin_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a model with standard Pareto signal (index `alpha`), standard
/// Pareto noise (index `alpha_prime`) and zeta labels with exponent `beta`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn karlin_model_new(
    alpha: f64,
    alpha_prime: f64,
    beta: f64,
    out: *mut *mut KarlinModel,
) -> KarlinStatus {
    guard(|| {
        let m = core(ModelParams::pareto(alpha, alpha_prime, beta))?;
        write_out(out, Box::into_raw(Box::new(KarlinModel(m))))
    })
}

/// # Safety
/// `model` must be NULL or a handle from [`karlin_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn karlin_model_free(model: *mut KarlinModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn karlin_model_regime(model: *const KarlinModel, out: *mut KarlinRegime) -> KarlinStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let r = match m.0.regime() {
            Regime::NoiseDominance => KarlinRegime::Noise,
            Regime::SignalDominance => KarlinRegime::Signal,
            Regime::Critical => KarlinRegime::Critical,
        };
        write_out(out, r)
    })
}

/// Scaling constant of the model's regime at sample size `n`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn karlin_model_normalizer(model: *const KarlinModel, n: u64, out: *mut f64) -> KarlinStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        let ctx = NormalizerContext {
            signal: &m.signal_law,
            noise: &m.noise_law,
            labels: &m.label_law,
        };
        let norm = core(solve_normalizer(NormalizerKind::for_regime(m.regime()), n, &ctx))?;
        write_out(out, norm.value)
    })
}

/// Simulates `n` steps of the model with the given seed.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn karlin_simulate(
    model: *const KarlinModel,
    n: u64,
    seed: u64,
    out: *mut *mut KarlinPath,
) -> KarlinStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        let path = core(simulate_path(m, n, &mut RngStream::new(seed, 0)))?;
        write_out(out, Box::into_raw(Box::new(KarlinPath(path))))
    })
}

/// # Safety
/// `path` must be NULL or a handle from [`karlin_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn karlin_path_free(path: *mut KarlinPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Number of steps in the path; 0 for NULL.
///
/// # Safety
/// `path` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn karlin_path_len(path: *const KarlinPath) -> u64 {
    path.as_ref().map_or(0, |p| p.0.n() as u64)
}

/// Step `i` (zero-based): label, signal value, noise and product. Any of the
/// output pointers may be NULL.
///
/// # Safety
/// `path` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn karlin_path_get(
    path: *const KarlinPath,
    i: u64,
    label: *mut u64,
    sigma: *mut f64,
    z: *mut f64,
    x: *mut f64,
) -> KarlinStatus {
    guard(|| {
        let p = &deref(path, "path")?.0;
        let i = usize::try_from(i).ok().filter(|&i| i < p.n()).ok_or_else(|| {
            invalid(format!("index {i} out of range for path of length {}", p.n()))
        })?;
        if !label.is_null() {
            label.write(p.labels()[i]);
        }
        if !sigma.is_null() {
            sigma.write(p.sigma(i));
        }
        if !z.is_null() {
            z.write(p.noise()[i]);
        }
        if !x.is_null() {
            x.write(p.products()[i]);
        }
        Ok(())
    })
}

/// Maximum of the path over the index interval `[lo, hi)` of `[0, 1]`
/// (closed at 1), in the unscaled units of the products.
///
/// # Safety
/// `path` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn karlin_path_box_max(path: *const KarlinPath, lo: f64, hi: f64, out: *mut f64) -> KarlinStatus {
    guard(|| {
        let p = &deref(path, "path")?.0;
        let b = core(UnitBox::interval(lo, hi))?;
        let v = core(empirical_sup_measure(p, &[b]))?;
        write_out(out, v[0])
    })
}

/// Runs the verification suite described by a JSON config. `threads` caps
/// the worker pool; 0 uses all available cores.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn karlin_verify(
    config_json: *const c_char,
    threads: u32,
    out: *mut *mut KarlinReport,
) -> KarlinStatus {
    guard(|| {
        let text = read_str(config_json, "config")?;
        let cfg = core(ExperimentConfig::from_json(text))?;
        let threads = (threads > 0).then_some(threads as usize);
        let report = core(run_suite(&cfg, threads))?;
        write_out(out, Box::into_raw(Box::new(KarlinReport(report))))
    })
}

/// # Safety
/// `report` must be NULL or a handle from [`karlin_verify`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn karlin_report_free(report: *mut KarlinReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Whether every record passed after the multiple-testing correction.
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn karlin_report_passed(report: *const KarlinReport, out: *mut bool) -> KarlinStatus {
    guard(|| write_out(out, deref(report, "report")?.0.bonferroni_passed))
}

/// The report as JSON. With `canonical` set, run-dependent timing is left
/// out. The string is owned by the caller; release it with
/// [`karlin_string_free`].
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn karlin_report_json(
    report: *const KarlinReport,
    canonical: bool,
    out: *mut *mut c_char,
) -> KarlinStatus {
    guard(|| {
        let r = &deref(report, "report")?.0;
        let text = core(if canonical { r.canonical_json() } else { r.to_json() })?;
        let c = CString::new(text).map_err(|e| (KarlinStatus::Internal, e.to_string()))?;
        write_out(out, c.into_raw())
    })
}
