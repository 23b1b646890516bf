//! C ABI over `sparse_recover`.
//!
//! Datasets live behind an opaque handle. Every fallible function returns an
//! [`SrStatus`]; on failure a human-readable message is kept per thread and can
//! be copied out with [`sr_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ndarray::{Array1, Array2};
use sparse_recover::bounds::{psi_mc, psi_plus_mc, MonteCarloConfig};
use sparse_recover::model::split_sample;
use sparse_recover::mom::{mom_pilot_estimate, mom_select_with_pilot, MomConfig};
use sparse_recover::selector::{Regime, ThresholdSpec, TwoStepFit};
use sparse_recover::sim::{gen_instance, GeneratorSpec};
use sparse_recover::slope::{prox_sorted_l1, LambdaWeights, PilotConfig};
use sparse_recover::{Dataset, Error, ProblemInstance, SplitScheme};

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    DimensionMismatch = 3,
    ZeroColumn = 4,
    RegimeViolation = 5,
    IndexOutOfRange = 6,
    Panic = 7,
}

/// Threshold regimes, matching the library order.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrRegime {
    KnownAll = 0,
    KnownA = 1,
    KnownSigma = 2,
    FullyAdaptive = 3,
}

impl From<SrRegime> for Regime {
    fn from(r: SrRegime) -> Self {
        match r {
            SrRegime::KnownAll => Regime::KnownAll,
            SrRegime::KnownA => Regime::KnownA,
            SrRegime::KnownSigma => Regime::KnownSigma,
            SrRegime::FullyAdaptive => Regime::FullyAdaptive,
        }
    }
}

/// Opaque dataset handle.
pub struct SrDataset {
    inner: Dataset,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SrStatus {
    match e {
        Error::InvalidParameter(_) => SrStatus::InvalidParameter,
        Error::DimensionMismatch { .. } => SrStatus::DimensionMismatch,
        Error::ZeroColumn { .. } => SrStatus::ZeroColumn,
        Error::IndexOutOfRange { .. } => SrStatus::IndexOutOfRange,
        Error::RegimeViolation(_) => SrStatus::RegimeViolation,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SrStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer passed for {what}"));
            SrStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            SrStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(ptr: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if ptr.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a, T>(
    ptr: *mut T,
    len: usize,
    what: &'static str,
) -> Result<&'a mut [T], Failure> {
    if ptr.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts_mut(ptr, len))
}

unsafe fn dataset<'a>(handle: *const SrDataset) -> Result<&'a Dataset, Failure> {
    handle
        .as_ref()
        .map(|d| &d.inner)
        .ok_or(Failure::Null("dataset"))
}

/// Copies the last error message of this thread into `buf` (NUL terminated,
/// truncated to `len - 1` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn sr_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sr_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => panic!("version string"),
        };
    VERSION.as_ptr()
}

/// Copies a row-major `n x p` design and a length-`n` response into a new
/// dataset handle.
///
/// # Safety
/// `x` must be valid for `n * p` reads, `y` for `n`, `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn sr_dataset_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut SrDataset,
) -> SrStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let xs = input(x, n * p, "x")?;
        let ys = input(y, n, "y")?;
        let x = Array2::from_shape_vec((n, p), xs.to_vec())
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let inner = Dataset::new(x, Array1::from(ys.to_vec()))?;
        *out = Box::into_raw(Box::new(SrDataset { inner }));
        Ok(())
    })
}

/// Generates a Gaussian instance with all nonzero coefficients equal to `a`.
/// When `beta` is non-null it receives the `p` true coefficients.
///
/// # Safety
/// `out` must be valid for one write; `beta` null or valid for `p` writes.
#[no_mangle]
pub unsafe extern "C" fn sr_dataset_generate(
    n: usize,
    p: usize,
    s: usize,
    a: f64,
    sigma: f64,
    seed: u64,
    beta: *mut f64,
    out: *mut *mut SrDataset,
) -> SrStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let problem = if sigma == 0.0 {
            ProblemInstance::noiseless(n, p, s, a, n / 2)?
        } else {
            ProblemInstance::new(n, p, s, a, sigma, n / 2)?
        };
        let (inner, truth) = gen_instance(&problem, &GeneratorSpec::gaussian(seed))?;
        if !beta.is_null() {
            output(beta, p, "beta")?.copy_from_slice(&truth.values);
        }
        *out = Box::into_raw(Box::new(SrDataset { inner }));
        Ok(())
    })
}

/// Releases a dataset handle; null is ignored.
///
/// # Safety
/// `handle` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sr_dataset_free(handle: *mut SrDataset) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Rows of the dataset, or 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn sr_dataset_n(handle: *const SrDataset) -> usize {
    handle.as_ref().map_or(0, |d| d.inner.n())
}

/// Columns of the dataset, or 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn sr_dataset_p(handle: *const SrDataset) -> usize {
    handle.as_ref().map_or(0, |d| d.inner.p())
}

/// Two-step selector. The first `n1` rows fit the square-root SLOPE pilot
/// (practical penalty), the rest are thresholded under `regime`. Parameters
/// not used by the regime are ignored. `support` receives `p` bytes of 0/1;
/// `sigma_hat`, when non-null, receives the residual scale on the second part.
///
/// # Safety
/// `handle` must be live, `support` valid for `p` writes, `sigma_hat` null or
/// valid for one write.
#[no_mangle]
pub unsafe extern "C" fn sr_select(
    handle: *const SrDataset,
    regime: SrRegime,
    a: f64,
    sigma: f64,
    s: usize,
    delta: f64,
    n1: usize,
    support: *mut u8,
    sigma_hat: *mut f64,
) -> SrStatus {
    guard(|| {
        let data = dataset(handle)?;
        let (n, p) = (data.n(), data.p());
        let out = output(support, p, "support")?;
        if n1 == 0 || n1 >= n {
            return Err(Error::InvalidParameter(format!("n1 must lie in 1..{n}, got {n1}")).into());
        }
        let n2 = n - n1;
        let spec = match Regime::from(regime) {
            Regime::KnownAll => ThresholdSpec::known_all(a, sigma, s, p, n2)?,
            Regime::KnownA => ThresholdSpec::known_a(a, p, n2)?,
            Regime::KnownSigma => ThresholdSpec::known_sigma(sigma, p, n2)?,
            Regime::FullyAdaptive => ThresholdSpec::fully_adaptive(p, n2)?,
        }
        .with_delta(delta)?;
        let fit = TwoStepFit::fit(
            data,
            &SplitScheme::leading(n, n1),
            &PilotConfig::practical(),
        )?;
        let sel = fit.select(&spec)?;
        out.copy_from_slice(&sel.support.to_bits());
        if !sigma_hat.is_null() {
            *sigma_hat = fit.sigma_hat;
        }
        Ok(())
    })
}

/// Median-of-means selector with `k` blocks (0 picks the default rule) and
/// noise scale `sigma`. Same layout conventions as [`sr_select`].
///
/// # Safety
/// `handle` must be live and `support` valid for `p` writes.
#[no_mangle]
pub unsafe extern "C" fn sr_mom_select(
    handle: *const SrDataset,
    sigma: f64,
    k: usize,
    n1: usize,
    support: *mut u8,
) -> SrStatus {
    guard(|| {
        let data = dataset(handle)?;
        let (n, p) = (data.n(), data.p());
        let out = output(support, p, "support")?;
        if n1 == 0 || n1 >= n {
            return Err(Error::InvalidParameter(format!("n1 must lie in 1..{n}, got {n1}")).into());
        }
        let mut cfg = MomConfig::new(sigma);
        if k > 0 {
            cfg = cfg.with_blocks(k);
        }
        let (first, second) = split_sample(data, &SplitScheme::leading(n, n1))?;
        let (beta, _) = mom_pilot_estimate(first.x(), first.y(), &cfg, &PilotConfig::practical())?;
        let sel = mom_select_with_pilot(second.x(), second.y(), &beta, &cfg)?;
        out.copy_from_slice(&sel.support.to_bits());
        Ok(())
    })
}

/// Proximal operator of `scale * sum_j lambda_j |v|_(j)`; `lambda` must be
/// non-increasing and nonnegative.
///
/// # Safety
/// `v`, `lambda` and `out` must be valid for `len` elements.
#[no_mangle]
pub unsafe extern "C" fn sr_prox_sorted_l1(
    v: *const f64,
    lambda: *const f64,
    len: usize,
    scale: f64,
    out: *mut f64,
) -> SrStatus {
    guard(|| {
        let v = input(v, len, "v")?;
        let weights = LambdaWeights::from_weights(input(lambda, len, "lambda")?.to_vec())?;
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(
                Error::InvalidParameter(format!("scale must be nonnegative, got {scale}")).into(),
            );
        }
        let res = prox_sorted_l1(ndarray::ArrayView1::from(v), &weights, scale);
        output(out, len, "out")?.copy_from_slice(res.as_slice().expect("contiguous"));
        Ok(())
    })
}

/// Monte Carlo estimate of `psi` (`plus == 0`) or `psi_plus` (`plus != 0`).
/// `se` receives the standard error, or NaN for a single trial.
///
/// # Safety
/// `value` must be valid for one write; `se` null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn sr_psi(
    n: usize,
    p: usize,
    s: usize,
    a: f64,
    sigma: f64,
    trials: usize,
    seed: u64,
    plus: i32,
    value: *mut f64,
    se: *mut f64,
) -> SrStatus {
    guard(|| {
        if value.is_null() {
            return Err(Failure::Null("value"));
        }
        let mc = MonteCarloConfig::new(trials, seed);
        let est = if plus != 0 {
            psi_plus_mc(n, p, s, a, sigma, &mc)?
        } else {
            psi_mc(n, p, s, a, sigma, &mc)?
        };
        *value = est.value;
        if !se.is_null() {
            *se = est.se.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}
