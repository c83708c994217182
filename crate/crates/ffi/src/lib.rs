//! C ABI over the `riemann-erp` classifier.
//!
//! Every fallible function returns an [`ErpStatus`]; on failure a
//! thread-local message is available from [`erp_last_error_message`].
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Trials are `channels x samples` arrays of
//! doubles in row-major order; batches of trials are laid out one after the
//! other.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use nalgebra::DMatrix;
use riemann_erp::classifier::{label_for_score, train, AdaptationState, AlphaSchedule, MdmModel};
use riemann_erp::erp_cov::{EstimatorConfig, Label, Trial};
use riemann_erp::spd::{riemannian_distance, MeanConfig, SpdMatrix};
use riemann_erp::storage::ModelFile;
use riemann_erp::Error;

/// Status codes; values 2 to 6 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErpStatus {
    Ok = 0,
    Failure = 1,
    Format = 2,
    ClassCoverage = 3,
    DimensionMismatch = 4,
    InvalidConfig = 6,
    NullPointer = 7,
    InvalidArgument = 8,
    Panic = 9,
}

pub const ERP_LABEL_NONTARGET: u8 = 0;
pub const ERP_LABEL_TARGET: u8 = 1;
pub const ERP_LABEL_UNKNOWN: u8 = 2;

/// `alpha = min(1, n / n_full)`; the parameter is `n_full`.
pub const ERP_SCHEDULE_LINEAR: u32 = 0;
/// Constant `alpha`; the parameter is `alpha`.
pub const ERP_SCHEDULE_FIXED: u32 = 1;

/// Trained classifier together with its default adaptation schedule.
pub struct ErpModel {
    file: ModelFile,
}

/// Single-writer adaptation state of one session.
pub struct ErpAdaptation {
    state: AdaptationState,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).expect("nul bytes removed"));
}

enum Fail {
    Core(Error),
    Null(&'static str),
    Arg(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> ErpStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => (ErpStatus::Ok, String::new()),
        Ok(Err(Fail::Null(what))) => (ErpStatus::NullPointer, format!("null pointer: {what}")),
        Ok(Err(Fail::Arg(msg))) => (ErpStatus::InvalidArgument, msg),
        Ok(Err(Fail::Core(e))) => {
            let status = match e {
                Error::Format(_) => ErpStatus::Format,
                Error::ClassCoverage { .. } => ErpStatus::ClassCoverage,
                Error::DimensionMismatch { .. } => ErpStatus::DimensionMismatch,
                Error::InvalidConfig(_) => ErpStatus::InvalidConfig,
                _ => ErpStatus::Failure,
            };
            (status, e.to_string())
        }
        Err(_) => (ErpStatus::Panic, "internal panic".to_string()),
    };
    set_error(msg);
    status
}

fn non_null<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    // SAFETY: caller guarantees a non-null pointer refers to a live value.
    unsafe { p.as_ref() }.ok_or(Fail::Null(what))
}

fn non_null_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    // SAFETY: as above, with exclusive access.
    unsafe { p.as_mut() }.ok_or(Fail::Null(what))
}

fn doubles<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    // SAFETY: caller guarantees `len` readable doubles.
    Ok(unsafe { slice::from_raw_parts(p, len) })
}

fn path_arg(p: *const c_char) -> Result<String, Fail> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    // SAFETY: caller guarantees a nul-terminated string.
    let s = unsafe { CStr::from_ptr(p) };
    s.to_str()
        .map(str::to_owned)
        .map_err(|_| Fail::Arg("path is not valid UTF-8".into()))
}

fn label_arg(b: u8) -> Result<Label, Fail> {
    Label::from_byte(b).ok_or_else(|| Fail::Arg(format!("invalid label code {b}")))
}

fn trial_arg(data: *const f64, channels: usize, samples: usize, label: Label) -> Result<Trial, Fail> {
    let len = channels
        .checked_mul(samples)
        .ok_or_else(|| Fail::Arg("trial size overflows".into()))?;
    let values = doubles(data, len, "trial data")?;
    // scoring ignores the sample rate
    Ok(Trial::new(
        nalgebra_row_major(channels, samples, values),
        label,
        0,
        1.0,
    )?)
}

fn nalgebra_row_major(rows: usize, cols: usize, values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, values)
}

fn schedule_arg(kind: u32, param: f64) -> Result<AlphaSchedule, Fail> {
    let schedule = match kind {
        ERP_SCHEDULE_LINEAR if param >= 1.0 && param.fract() == 0.0 => AlphaSchedule::LinearByTrialCount {
            n_full: param as usize,
        },
        ERP_SCHEDULE_FIXED => AlphaSchedule::Fixed(param),
        _ => return Err(Fail::Arg(format!("invalid schedule ({kind}, {param})"))),
    };
    schedule.validate()?;
    Ok(schedule)
}

fn write_out<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    // SAFETY: caller guarantees `out` is writable.
    unsafe { out.write(value) };
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn erp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn erp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reads a model file.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn erp_model_load(path: *const c_char, out: *mut *mut ErpModel) -> ErpStatus {
    guard(|| {
        let file = ModelFile::read(path_arg(path)?)?;
        write_out(out, boxed(ErpModel { file }), "out")
    })
}

/// Writes a model file.
///
/// # Safety
/// `model` must come from this library; `path` must be nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn erp_model_save(model: *const ErpModel, path: *const c_char) -> ErpStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        Ok(m.file.write(path_arg(path)?)?)
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn erp_model_free(model: *mut ErpModel) {
    if !model.is_null() {
        // SAFETY: pointer was produced by `Box::into_raw`.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Trains from `n_trials` consecutive trials with one label code each.
/// A negative `shrinkage` selects the shape-dependent default. The model's
/// adaptation schedule defaults to linear with `n_full = 120`.
///
/// # Safety
/// `data` must hold `n_trials * channels * samples` doubles, `labels`
/// `n_trials` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn erp_model_train(
    data: *const f64,
    labels: *const u8,
    n_trials: usize,
    channels: usize,
    samples: usize,
    shrinkage: f64,
    out: *mut *mut ErpModel,
) -> ErpStatus {
    guard(|| {
        let size = channels
            .checked_mul(samples)
            .ok_or_else(|| Fail::Arg("trial size overflows".into()))?;
        let total = size
            .checked_mul(n_trials)
            .ok_or_else(|| Fail::Arg("batch size overflows".into()))?;
        let values = doubles(data, total, "data")?;
        if labels.is_null() {
            return Err(Fail::Null("labels"));
        }
        // SAFETY: caller guarantees `n_trials` label bytes.
        let codes = unsafe { slice::from_raw_parts(labels, n_trials) };
        let mut trials = Vec::with_capacity(n_trials);
        for (i, &code) in codes.iter().enumerate() {
            let m = nalgebra_row_major(channels, samples, &values[i * size..(i + 1) * size]);
            trials.push(Trial::new(m, label_arg(code)?, i as i64, 1.0)?);
        }
        let est = if shrinkage < 0.0 {
            EstimatorConfig::default_for(channels, samples)
        } else {
            EstimatorConfig::new(shrinkage)?
        };
        let model = train(&trials, &est, &MeanConfig::default())?;
        write_out(
            out,
            boxed(ErpModel {
                file: ModelFile::new(model, AlphaSchedule::default()),
            }),
            "out",
        )
    })
}

/// Trial shape expected by the model.
///
/// # Safety
/// `model` must come from this library; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn erp_model_dims(model: *const ErpModel, channels: *mut usize, samples: *mut usize) -> ErpStatus {
    guard(|| {
        let m = &non_null(model, "model")?.file.model;
        write_out(channels, m.channels(), "channels")?;
        write_out(samples, m.samples(), "samples")
    })
}

fn score_with(model: &MdmModel, data: *const f64, channels: usize, samples: usize) -> Result<f64, Fail> {
    Ok(model.score(&trial_arg(data, channels, samples, Label::Unknown)?)?)
}

/// Score `d(nontarget mean, S) - d(target mean, S)`; positive means target.
///
/// # Safety
/// `data` must hold `channels * samples` doubles; `score` must be writable.
#[no_mangle]
pub unsafe extern "C" fn erp_model_score(
    model: *const ErpModel,
    data: *const f64,
    channels: usize,
    samples: usize,
    score: *mut f64,
) -> ErpStatus {
    guard(|| {
        let m = &non_null(model, "model")?.file.model;
        write_out(score, score_with(m, data, channels, samples)?, "score")
    })
}

/// Predicted label code of one trial.
///
/// # Safety
/// As [`erp_model_score`].
#[no_mangle]
pub unsafe extern "C" fn erp_model_predict(
    model: *const ErpModel,
    data: *const f64,
    channels: usize,
    samples: usize,
    label: *mut u8,
) -> ErpStatus {
    guard(|| {
        let m = &non_null(model, "model")?.file.model;
        let s = score_with(m, data, channels, samples)?;
        write_out(label, label_for_score(s).to_byte(), "label")
    })
}

/// Affine-invariant distance between two `dim x dim` SPD matrices.
///
/// # Safety
/// `a` and `b` must hold `dim * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn erp_distance(a: *const f64, b: *const f64, dim: usize, out: *mut f64) -> ErpStatus {
    guard(|| {
        let len = dim.checked_mul(dim).ok_or_else(|| Fail::Arg("dimension overflows".into()))?;
        let spd = |p, what| -> Result<SpdMatrix, Fail> {
            Ok(SpdMatrix::new(nalgebra_row_major(dim, dim, doubles(p, len, what)?))?)
        };
        let d = riemannian_distance(&spd(a, "a")?, &spd(b, "b")?)?;
        write_out(out, d, "out")
    })
}

/// Starts adapting `model` to a new subject. `kind` is one of the
/// `ERP_SCHEDULE_*` codes.
///
/// # Safety
/// `model` must come from this library; `out` must be writable. The model
/// is copied and may be freed afterwards.
#[no_mangle]
pub unsafe extern "C" fn erp_adaptation_new(
    model: *const ErpModel,
    kind: u32,
    param: f64,
    out: *mut *mut ErpAdaptation,
) -> ErpStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let state = AdaptationState::new(m.file.model.clone(), schedule_arg(kind, param)?)?;
        write_out(out, boxed(ErpAdaptation { state }), "out")
    })
}

/// Learns from one labeled trial (target or nontarget).
///
/// # Safety
/// `state` must come from this library; `data` must hold
/// `channels * samples` doubles.
#[no_mangle]
pub unsafe extern "C" fn erp_adaptation_update(
    state: *mut ErpAdaptation,
    data: *const f64,
    channels: usize,
    samples: usize,
    label: u8,
) -> ErpStatus {
    guard(|| {
        let s = non_null_mut(state, "state")?;
        let label = label_arg(label)?;
        let trial = trial_arg(data, channels, samples, label)?;
        Ok(s.state.online_update(&trial, label)?)
    })
}

/// Scores one trial with the current blend of generic and subject means.
///
/// # Safety
/// As [`erp_model_score`], with `state` in place of the model.
#[no_mangle]
pub unsafe extern "C" fn erp_adaptation_score(
    state: *const ErpAdaptation,
    data: *const f64,
    channels: usize,
    samples: usize,
    score: *mut f64,
) -> ErpStatus {
    guard(|| {
        let s = non_null(state, "state")?;
        let model = s.state.scoring_model()?;
        write_out(score, score_with(&model, data, channels, samples)?, "score")
    })
}

/// Current blend weight toward the subject means.
///
/// # Safety
/// `state` must come from this library; `alpha` must be writable.
#[no_mangle]
pub unsafe extern "C" fn erp_adaptation_alpha(state: *const ErpAdaptation, alpha: *mut f64) -> ErpStatus {
    guard(|| write_out(alpha, non_null(state, "state")?.state.alpha(), "alpha"))
}

/// Snapshot of the current blended model as an independent handle.
///
/// # Safety
/// `state` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn erp_adaptation_model(state: *const ErpAdaptation, out: *mut *mut ErpModel) -> ErpStatus {
    guard(|| {
        let s = &non_null(state, "state")?.state;
        let file = ModelFile::new(s.scoring_model()?, s.schedule());
        write_out(out, boxed(ErpModel { file }), "out")
    })
}

/// Releases an adaptation state. Null is ignored.
///
/// # Safety
/// `state` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn erp_adaptation_free(state: *mut ErpAdaptation) {
    if !state.is_null() {
        // SAFETY: pointer was produced by `Box::into_raw`.
        drop(unsafe { Box::from_raw(state) });
    }
}
