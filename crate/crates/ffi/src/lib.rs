//! C ABI for ltrkit.
//!
//! Objects cross the boundary as opaque handles created by `*_load` and
//! released by `*_free`. Every fallible call returns an [`LtrStatus`]; on
//! failure, [`ltr_last_error_message`] describes the error on the calling
//! thread. Panics are caught and reported as [`LtrStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ltrkit::datamodel::{load_dataset, Dataset, EngagementOutcome};
use ltrkit::eval::ndcg_at_k;
use ltrkit::explain::tree_shap;
use ltrkit::labelforge::{
    compose_label, compute_intervals, sigmoid_transform, EngagementGrading, SigmoidParams,
};
use ltrkit::ranker::{load_ensemble, TreeEnsemble};
use ltrkit::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LtrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Schema = 5,
    Domain = 6,
    ModelFormat = 7,
    /// The result is mathematically undefined, e.g. NDCG with zero ideal gain.
    Undefined = 8,
    Internal = 9,
}

/// A loaded dataset.
pub struct LtrDataset {
    inner: Dataset,
}

/// A loaded tree ensemble.
pub struct LtrEnsemble {
    inner: TreeEnsemble,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let mut bytes = message.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LtrStatus {
    match e {
        Error::Io { .. } => LtrStatus::Io,
        Error::Parse { .. } => LtrStatus::Parse,
        Error::SchemaViolation { .. } | Error::SchemaMismatch(_) | Error::InvalidDataset(_) => {
            LtrStatus::Schema
        }
        Error::Domain(_) => LtrStatus::Domain,
        Error::ModelFormat(_) | Error::ZeroCover { .. } => LtrStatus::ModelFormat,
        _ => LtrStatus::InvalidArgument,
    }
}

struct Fail(LtrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, recording any error or panic for [`ltr_last_error_message`].
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LtrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LtrStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            LtrStatus::Internal
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(LtrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(path: *const c_char) -> Result<String, Fail> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail(LtrStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

unsafe fn slice_arg<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn out_arg<'a, T>(out: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    out.as_mut().ok_or_else(|| null(what))
}

fn sigmoid(alpha: f64, beta: f64) -> Result<SigmoidParams, Fail> {
    Ok(SigmoidParams::new(alpha, beta)?)
}

/// Message of the last failed call on this thread, or null if none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ltr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn ltr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a dataset CSV. On success `*out` owns a handle to free with
/// [`ltr_dataset_free`].
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ltr_dataset_load(
    path: *const c_char,
    out: *mut *mut LtrDataset,
) -> LtrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let inner = load_dataset(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(LtrDataset { inner }));
        Ok(())
    })
}

/// Releases a dataset. Null is ignored.
///
/// # Safety
/// `dataset` must come from [`ltr_dataset_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ltr_dataset_free(dataset: *mut LtrDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Group, item and feature counts of a dataset. Any out pointer may be null.
///
/// # Safety
/// `dataset` must be a live handle; non-null out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ltr_dataset_counts(
    dataset: *const LtrDataset,
    n_groups: *mut usize,
    n_items: *mut usize,
    n_features: *mut usize,
) -> LtrStatus {
    guard(|| {
        let d = &dataset.as_ref().ok_or_else(|| null("dataset"))?.inner;
        if let Some(o) = n_groups.as_mut() {
            *o = d.groups().len();
        }
        if let Some(o) = n_items.as_mut() {
            *o = d.n_items();
        }
        if let Some(o) = n_features.as_mut() {
            *o = d.schema().len();
        }
        Ok(())
    })
}

/// Loads a model file written by ltrkit. Free with [`ltr_ensemble_free`].
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ltr_ensemble_load(
    path: *const c_char,
    out: *mut *mut LtrEnsemble,
) -> LtrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let inner = load_ensemble(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(LtrEnsemble { inner }));
        Ok(())
    })
}

/// Releases an ensemble. Null is ignored.
///
/// # Safety
/// `ensemble` must come from [`ltr_ensemble_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ltr_ensemble_free(ensemble: *mut LtrEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

/// Number of features the ensemble expects, or 0 for a null handle.
///
/// # Safety
/// `ensemble` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ltr_ensemble_n_features(ensemble: *const LtrEnsemble) -> usize {
    ensemble.as_ref().map_or(0, |e| e.inner.n_features())
}

/// Scores one feature vector of length `len`.
///
/// # Safety
/// `features` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ltr_ensemble_predict(
    ensemble: *const LtrEnsemble,
    features: *const f64,
    len: usize,
    out: *mut f64,
) -> LtrStatus {
    guard(|| {
        let e = &ensemble.as_ref().ok_or_else(|| null("ensemble"))?.inner;
        let x = slice_arg(features, len, "features")?;
        *out_arg(out, "out")? = e.predict(x)?;
        Ok(())
    })
}

/// TreeSHAP attributions of one feature vector. `phi` receives `len` values;
/// `base_value` (may be null) receives the expected model output.
///
/// # Safety
/// `features` and `phi` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ltr_ensemble_tree_shap(
    ensemble: *const LtrEnsemble,
    features: *const f64,
    len: usize,
    phi: *mut f64,
    base_value: *mut f64,
) -> LtrStatus {
    guard(|| {
        let e = &ensemble.as_ref().ok_or_else(|| null("ensemble"))?.inner;
        let x = slice_arg(features, len, "features")?;
        if phi.is_null() && len > 0 {
            return Err(null("phi"));
        }
        let a = tree_shap(e, x)?;
        if len > 0 {
            std::slice::from_raw_parts_mut(phi, len).copy_from_slice(&a.phi);
        }
        if let Some(b) = base_value.as_mut() {
            *b = a.base_value;
        }
        Ok(())
    })
}

/// `1 / (1 + exp(-alpha (c - beta)))` for `c` in [0, 1].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ltr_sigmoid_transform(
    c: f64,
    alpha: f64,
    beta: f64,
    out: *mut f64,
) -> LtrStatus {
    guard(|| {
        *out_arg(out, "out")? = sigmoid_transform(c, sigmoid(alpha, beta)?)?;
        Ok(())
    })
}

/// Scores where the transform's slope crosses 1. When `*degenerate` is set
/// the slope never exceeds 1 and `c1`, `c2` both equal `beta`.
///
/// # Safety
/// Out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ltr_compute_intervals(
    alpha: f64,
    beta: f64,
    c1: *mut f64,
    c2: *mut f64,
    degenerate: *mut bool,
) -> LtrStatus {
    guard(|| {
        let b = compute_intervals(sigmoid(alpha, beta)?);
        *out_arg(c1, "c1")? = b.c1;
        *out_arg(c2, "c2")? = b.c2;
        *out_arg(degenerate, "degenerate")? = b.degenerate;
        Ok(())
    })
}

/// NDCG@k of ratings given in ranked order, with gain `2^r - 1`. Returns
/// [`LtrStatus::Undefined`] when every rating is zero.
///
/// # Safety
/// `ratings` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ltr_ndcg_at_k(
    ratings: *const f64,
    len: usize,
    k: usize,
    out: *mut f64,
) -> LtrStatus {
    guard(|| {
        let r = slice_arg(ratings, len, "ratings")?;
        let out = out_arg(out, "out")?;
        match ndcg_at_k(r, k)? {
            Some(v) => {
                *out = v;
                Ok(())
            }
            None => Err(Fail(LtrStatus::Undefined, "ideal DCG is zero".into())),
        }
    })
}

/// Training label `sigma(c) * E` under the default engagement grades.
/// `outcome` is 0 (not engaged), 1 (clicked), 2 (added to cart) or 3
/// (ordered); the transform applies only when `use_transform` is set.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ltr_compose_label(
    c: f64,
    outcome: u32,
    use_transform: bool,
    alpha: f64,
    beta: f64,
    out: *mut f64,
) -> LtrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let outcome = *EngagementOutcome::ALL
            .get(outcome as usize)
            .ok_or_else(|| {
                Fail(
                    LtrStatus::InvalidArgument,
                    format!("unknown outcome {outcome}"),
                )
            })?;
        let transform = if use_transform {
            Some(sigmoid(alpha, beta)?)
        } else {
            None
        };
        *out = compose_label(c, outcome, &EngagementGrading::default(), transform)?.y;
        Ok(())
    })
}
