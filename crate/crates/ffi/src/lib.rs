//! C interface to ppg-tcn.
//!
//! Every function returns a [`PpgStatus`]; on failure the message is kept
//! per thread and read with [`ppg_last_error_message`]. Handles are opaque
//! and owned by the caller until passed to the matching `_free`.
//!
//! A window is `PPG_WINDOW_CHANNELS × PPG_WINDOW_SAMPLES` floats, channel
//! major: PPG first, then accelerometer x, y, z.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ppg_tcn::io::{load_checkpoint, Checkpoint};
use ppg_tcn::pipeline::HRPostProcessor;
use ppg_tcn::quant::infer_int8;
use ppg_tcn::Tensor;

pub const PPG_WINDOW_CHANNELS: usize = 4;
pub const PPG_WINDOW_SAMPLES: usize = 256;

const _: () = assert!(PPG_WINDOW_CHANNELS == ppg_tcn::model::INPUT_CHANNELS && PPG_WINDOW_SAMPLES == ppg_tcn::model::WINDOW_LEN);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    UnsupportedVersion = 5,
    Dimension = 6,
    /// Any other library failure.
    Internal = 7,
    /// A Rust panic was caught at the boundary.
    Panic = 8,
}

#[derive(Debug, thiserror::Error)]
enum FfiError {
    #[error("{0} is null")]
    Null(&'static str),
    #[error("{0}")]
    Argument(String),
    #[error(transparent)]
    Core(#[from] ppg_tcn::Error),
}

impl FfiError {
    fn status(&self) -> PpgStatus {
        use ppg_tcn::Error as E;
        match self {
            FfiError::Null(_) => PpgStatus::NullPointer,
            FfiError::Argument(_) | FfiError::Core(E::Argument(_)) => PpgStatus::InvalidArgument,
            FfiError::Core(E::Io(_)) => PpgStatus::Io,
            FfiError::Core(E::Format { .. }) => PpgStatus::Format,
            FfiError::Core(E::UnsupportedVersion { .. }) => PpgStatus::UnsupportedVersion,
            FfiError::Core(E::Dimension(_)) => PpgStatus::Dimension,
            FfiError::Core(_) => PpgStatus::Internal,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn guard(f: impl FnOnce() -> Result<(), FfiError>) -> PpgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PpgStatus::Ok
        }
        Ok(Err(e)) => {
            set_last_error(e.to_string());
            e.status()
        }
        Err(_) => {
            set_last_error("internal panic".into());
            PpgStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, FfiError> {
    p.as_ref().ok_or(FfiError::Null(what))
}

unsafe fn non_null_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, FfiError> {
    p.as_mut().ok_or(FfiError::Null(what))
}

/// Message of the last failed call on this thread, or null after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn ppg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn ppg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// A loaded checkpoint, float or int8.
pub struct PpgModel {
    checkpoint: Checkpoint,
}

impl PpgModel {
    fn predict(&self, window: &[f32]) -> Result<f32, FfiError> {
        let x = Tensor::new(&[PPG_WINDOW_CHANNELS, PPG_WINDOW_SAMPLES], window.to_vec())?;
        Ok(match &self.checkpoint {
            Checkpoint::Float(m) => m.predict_raw(&x)?,
            Checkpoint::Quantized(q) => infer_int8(q, &x)?,
        })
    }
}

/// Loads a checkpoint file. On success `*out` owns a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ppg_model_load(path: *const c_char, out: *mut *mut PpgModel) -> PpgStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        *out = ptr::null_mut();
        let path = non_null(path, "path")?;
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| FfiError::Argument("path is not valid UTF-8".into()))?;
        let checkpoint = load_checkpoint(Path::new(path))?;
        *out = Box::into_raw(Box::new(PpgModel { checkpoint }));
        Ok(())
    })
}

/// Writes whether the handle holds an int8 model.
///
/// # Safety
/// `model` must come from [`ppg_model_load`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ppg_model_is_quantized(model: *const PpgModel, out: *mut bool) -> PpgStatus {
    guard(|| {
        let model = non_null(model, "model")?;
        *non_null_mut(out, "out")? = matches!(model.checkpoint, Checkpoint::Quantized(_));
        Ok(())
    })
}

/// Heart rate in BPM for `n_windows` consecutive windows at `samples`
/// (`len` floats in total), one output per window.
///
/// # Safety
/// `samples` must point to `len` floats and `out_bpm` to `n_windows` floats.
#[no_mangle]
pub unsafe extern "C" fn ppg_model_predict(
    model: *const PpgModel,
    samples: *const f32,
    len: usize,
    n_windows: usize,
    out_bpm: *mut f32,
) -> PpgStatus {
    guard(|| {
        let model = non_null(model, "model")?;
        non_null(samples, "samples")?;
        non_null_mut(out_bpm, "out_bpm")?;
        let per = PPG_WINDOW_CHANNELS * PPG_WINDOW_SAMPLES;
        if n_windows == 0 || n_windows.checked_mul(per) != Some(len) {
            return Err(FfiError::Argument(format!(
                "{len} samples do not form {n_windows} windows of {per}"
            )));
        }
        let samples = std::slice::from_raw_parts(samples, len);
        let out = std::slice::from_raw_parts_mut(out_bpm, n_windows);
        for (w, o) in samples.chunks_exact(per).zip(out) {
            *o = model.predict(w)?;
        }
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from [`ppg_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ppg_model_free(model: *mut PpgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Running-mean clipper over past outputs.
pub struct PpgPostProcessor {
    inner: HRPostProcessor,
}

/// Creates a clipper with the given history length and clip fraction.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ppg_postprocessor_new(capacity: usize, fraction: f32, out: *mut *mut PpgPostProcessor) -> PpgStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        *out = ptr::null_mut();
        let inner = HRPostProcessor::new(capacity, fraction)?;
        *out = Box::into_raw(Box::new(PpgPostProcessor { inner }));
        Ok(())
    })
}

/// Clips one raw estimate against the history and records the result.
///
/// # Safety
/// `pp` must come from [`ppg_postprocessor_new`]; `out_bpm` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ppg_postprocessor_process(pp: *mut PpgPostProcessor, raw_bpm: f32, out_bpm: *mut f32) -> PpgStatus {
    guard(|| {
        let pp = non_null_mut(pp, "postprocessor")?;
        let out = non_null_mut(out_bpm, "out_bpm")?;
        *out = pp.inner.process(raw_bpm);
        Ok(())
    })
}

/// Empties the history.
///
/// # Safety
/// `pp` must come from [`ppg_postprocessor_new`].
#[no_mangle]
pub unsafe extern "C" fn ppg_postprocessor_reset(pp: *mut PpgPostProcessor) -> PpgStatus {
    guard(|| {
        non_null_mut(pp, "postprocessor")?.inner.reset();
        Ok(())
    })
}

/// Releases a clipper. Null is ignored.
///
/// # Safety
/// `pp` must come from [`ppg_postprocessor_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ppg_postprocessor_free(pp: *mut PpgPostProcessor) {
    if !pp.is_null() {
        drop(Box::from_raw(pp));
    }
}
