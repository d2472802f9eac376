//! C interface to the clone detector.
//!
//! Every fallible call returns a [`MagnetStatus`]. On failure a message is
//! kept per thread and can be read with [`magnet_last_error`]. Handles are
//! opaque and must be released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use magnet::featurize::featurize_bundle;
use magnet::frontend::View;
use magnet::graphs::{build_bundle, to_dot, to_json, GraphError};
use magnet::model::{score_pair, ModelError};
use magnet::numcore::NumError;
use magnet::pipeline::{Checkpoint, PipelineError};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MagnetStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Parse = 4,
    Io = 5,
    Checkpoint = 6,
    Model = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MagnetView {
    Ast = 0,
    Cfg = 1,
    Dfg = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MagnetFormat {
    Dot = 0,
    Json = 1,
}

/// A loaded checkpoint: weights, vocabulary, model configuration and the
/// decision threshold.
pub struct MagnetModel {
    ck: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(MagnetStatus, String);

type Res<T> = Result<T, Failure>;

fn fail<T>(status: MagnetStatus, msg: impl Into<String>) -> Res<T> {
    Err(Failure(status, msg.into()))
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, records any failure message and converts panics into
/// [`MagnetStatus::Panic`].
fn guard(f: impl FnOnce() -> Res<()>) -> MagnetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MagnetStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MagnetStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Res<&'a str> {
    if p.is_null() {
        return fail(MagnetStatus::NullArgument, format!("{name} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(MagnetStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

fn graph_failure(e: GraphError) -> Failure {
    Failure(MagnetStatus::Parse, e.to_string())
}

fn pipeline_failure(e: PipelineError) -> Failure {
    let status = match &e {
        PipelineError::Io { .. } => MagnetStatus::Io,
        PipelineError::Graph(_) => MagnetStatus::Parse,
        PipelineError::Model(_) => MagnetStatus::Model,
        _ => MagnetStatus::Checkpoint,
    };
    Failure(status, e.to_string())
}

/// Message describing the last failed call on this thread, or null if the
/// last call succeeded. Valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn magnet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn magnet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a checkpoint file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn magnet_model_load(path: *const c_char, out: *mut *mut MagnetModel) -> MagnetStatus {
    guard(|| {
        if out.is_null() {
            return fail(MagnetStatus::NullArgument, "out is null");
        }
        let path = str_arg(path, "path")?;
        let ck = Checkpoint::load(Path::new(path)).map_err(pipeline_failure)?;
        *out = Box::into_raw(Box::new(MagnetModel { ck }));
        Ok(())
    })
}

/// Loads a checkpoint from `len` bytes at `data` into `*out`.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn magnet_model_load_bytes(
    data: *const u8,
    len: usize,
    out: *mut *mut MagnetModel,
) -> MagnetStatus {
    guard(|| {
        if out.is_null() || data.is_null() {
            return fail(MagnetStatus::NullArgument, "data or out is null");
        }
        let mut bytes = std::slice::from_raw_parts(data, len);
        let ck = Checkpoint::read_from(&mut bytes).map_err(pipeline_failure)?;
        *out = Box::into_raw(Box::new(MagnetModel { ck }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from a load function and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn magnet_model_free(model: *mut MagnetModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Decision threshold stored in the checkpoint, or NaN for a null model.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn magnet_model_sigma(model: *const MagnetModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.ck.sigma)
}

/// Scores two source fragments. `*score` receives the cosine similarity and
/// `*is_clone` is set to 1 when the score exceeds `sigma`. Pass NaN as
/// `sigma` to use the checkpoint's threshold. Either output may be null.
///
/// # Safety
/// `model` must be a live handle and the sources NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn magnet_compare(
    model: *const MagnetModel,
    source_a: *const c_char,
    source_b: *const c_char,
    sigma: f64,
    score: *mut f64,
    is_clone: *mut i32,
) -> MagnetStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(MagnetStatus::NullArgument, "model is null");
        };
        let ck = &m.ck;
        let mut bundles = Vec::with_capacity(2);
        for (name, src) in [("source_a", source_a), ("source_b", source_b)] {
            let text = str_arg(src, name)?;
            let b = build_bundle(text, name).map_err(|e| Failure(MagnetStatus::Parse, format!("{name}: {e}")))?;
            bundles.push(featurize_bundle(&b, &ck.vocab, ck.model.adjacency));
        }
        let s = match score_pair(&ck.params, &ck.model, &bundles[0], &bundles[1]) {
            Ok(s) => s,
            Err(ModelError::Num(NumError::ZeroVector)) => 0.0,
            Err(e) => return fail(MagnetStatus::Model, e.to_string()),
        };
        let sigma = if sigma.is_nan() { ck.sigma } else { sigma };
        if !score.is_null() {
            *score = s;
        }
        if !is_clone.is_null() {
            *is_clone = i32::from(s > sigma);
        }
        Ok(())
    })
}

/// Renders one graph view of `source` as DOT or JSON into `*out`, a newly
/// allocated string to be released with [`magnet_string_free`].
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn magnet_graph_export(
    source: *const c_char,
    view: MagnetView,
    format: MagnetFormat,
    out: *mut *mut c_char,
) -> MagnetStatus {
    guard(|| {
        if out.is_null() {
            return fail(MagnetStatus::NullArgument, "out is null");
        }
        let text = str_arg(source, "source")?;
        let bundle = build_bundle(text, "source").map_err(graph_failure)?;
        let g = bundle.view(match view {
            MagnetView::Ast => View::Ast,
            MagnetView::Cfg => View::Cfg,
            MagnetView::Dfg => View::Dfg,
        });
        let rendered = match format {
            MagnetFormat::Dot => to_dot(g),
            MagnetFormat::Json => to_json(g),
        };
        let c = CString::new(rendered).or_else(|_| fail(MagnetStatus::InvalidArgument, "output contains NUL"))?;
        *out = c.into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn magnet_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
