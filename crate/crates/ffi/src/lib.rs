//! C interface to `funkan`.
//!
//! Every function returns a [`FunkanStatus`]. On failure a message describing
//! the error is kept per thread and can be read with [`funkan_last_error`].
//! Images are passed as row-major `double` buffers; model tensors as
//! row-major `float` buffers in `N, C, H, W` order.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::slice;

use funkan::gibbs;
use funkan::hermite::HermiteBasis;
use funkan::metrics::{self, KellnerParams};
use funkan::models::{self, Model, ModelSpec};
use funkan::tensor::{no_grad, Mode, Tensor};
use funkan::{checkpoint, Error, Image};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunkanStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    NonFinite = 4,
    Config = 5,
    Data = 6,
    Io = 7,
    Gradient = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Opaque model handle.
pub struct FunkanModel {
    model: Model<f32>,
    out_channels: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> FunkanStatus {
    match err {
        Error::Shape { .. } => FunkanStatus::Shape,
        Error::InvalidArgument { .. } => FunkanStatus::InvalidArgument,
        Error::NonFinite { .. } => FunkanStatus::NonFinite,
        Error::Gradient(_) => FunkanStatus::Gradient,
        Error::Config(_) => FunkanStatus::Config,
        Error::Data(_) => FunkanStatus::Data,
        Error::Io { .. } => FunkanStatus::Io,
    }
}

struct Failure(FunkanStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FunkanStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FunkanStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FunkanStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FunkanStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(FunkanStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn area(h: usize, w: usize) -> Result<usize, Failure> {
    h.checked_mul(w)
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure(FunkanStatus::InvalidArgument, format!("bad image size {h}x{w}")))
}

unsafe fn image(p: *const f64, h: usize, w: usize, what: &str) -> Result<Image, Failure> {
    let n = area(h, w)?;
    Ok(Image::new(h, w, input(p, n, what)?.to_vec())?)
}

unsafe fn write_image(img: &Image, out: *mut f64) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    slice::from_raw_parts_mut(out, img.data.len()).copy_from_slice(&img.data);
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn funkan_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn funkan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a freshly initialised model from a JSON model spec
/// (for example `{"arch":"enhance"}`) or a bare name (`enhance`, `ufunkan`).
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn funkan_model_new(
    spec: *const c_char,
    seed: u64,
    out: *mut *mut FunkanModel,
) -> FunkanStatus {
    guard(|| {
        let text = str_arg(spec, "spec")?;
        let out = output(out, "out")?;
        let spec = if text.trim_start().starts_with('{') {
            serde_json::from_str::<ModelSpec>(text)
                .map_err(|e| Failure(FunkanStatus::Config, format!("model spec: {e}")))?
                .resolved()?
        } else {
            ModelSpec::named(text.trim())?
        };
        let model = models::build::<f32>(&spec, seed)?;
        *out = Box::into_raw(Box::new(FunkanModel {
            model,
            out_channels: spec.out_channels,
        }));
        Ok(())
    })
}

/// Loads a checkpoint manifest written by `funkan train`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn funkan_model_load(path: *const c_char, out: *mut *mut FunkanModel) -> FunkanStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = output(out, "out")?;
        let (model, manifest) = checkpoint::load::<f32>(Path::new(path))?;
        *out = Box::into_raw(Box::new(FunkanModel {
            model,
            out_channels: manifest.spec.out_channels,
        }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn funkan_model_free(model: *mut FunkanModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of trainable scalars.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn funkan_model_param_count(model: *const FunkanModel, out: *mut usize) -> FunkanStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        *output(out, "out")? = models::count_params(&m.model);
        Ok(())
    })
}

/// Forward FLOPs for one `channels × height × width` input.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn funkan_model_flops(
    model: *const FunkanModel,
    channels: usize,
    height: usize,
    width: usize,
    out: *mut u64,
) -> FunkanStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        *output(out, "out")? = models::count_flops(&m.model, &[1, channels, height, width])?;
        Ok(())
    })
}

/// Runs inference on a `batch × channels × height × width` tensor.
///
/// The output has `batch × out_channels × height × width` values (raw logits
/// for segmentation). `out_written` always receives the required length; if
/// `out_len` is smaller, nothing is written and `BufferTooSmall` is returned.
///
/// # Safety
/// `input` must hold the given number of floats and `out` at least `out_len`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn funkan_model_forward(
    model: *const FunkanModel,
    input_data: *const f32,
    batch: usize,
    channels: usize,
    height: usize,
    width: usize,
    out: *mut f32,
    out_len: usize,
    out_written: *mut usize,
) -> FunkanStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let written = output(out_written, "out_written")?;
        let n = [batch, channels, height, width]
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure(FunkanStatus::InvalidArgument, "empty or overflowing input shape".into()))?;
        let needed = batch * m.out_channels * height * width;
        *written = needed;
        if out_len < needed {
            return Err(Failure(
                FunkanStatus::BufferTooSmall,
                format!("output needs {needed} floats, got {out_len}"),
            ));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let x = Tensor::<f32>::new(input(input_data, n, "input")?.to_vec(), &[batch, channels, height, width])?;
        let _g = no_grad();
        let y = m.model.forward(&x, Mode::Eval)?.to_vec();
        slice::from_raw_parts_mut(out, needed).copy_from_slice(&y[..needed]);
        Ok(())
    })
}

/// Value of the `k`-th orthonormal Hermite function at `x`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn funkan_hermite(k: usize, x: f64, out: *mut f64) -> FunkanStatus {
    guard(|| {
        let basis = HermiteBasis::new(k + 1)?;
        *output(out, "out")? = basis.eval_scalar(k, x)?;
        Ok(())
    })
}

/// Band-limits `img` by keeping the central `out_h × out_w` block of its spectrum.
///
/// # Safety
/// `img` holds `h*w` doubles and `out` room for `out_h*out_w`.
#[no_mangle]
pub unsafe extern "C" fn funkan_kspace_crop(
    img: *const f64,
    h: usize,
    w: usize,
    out_h: usize,
    out_w: usize,
    out: *mut f64,
) -> FunkanStatus {
    guard(|| {
        let cropped = gibbs::kspace_crop(&image(img, h, w, "img")?, out_h, out_w)?;
        write_image(&cropped, out)
    })
}

/// Peak signal-to-noise ratio in dB (infinite for identical images).
///
/// # Safety
/// Both images hold `h*w` doubles.
#[no_mangle]
pub unsafe extern "C" fn funkan_psnr(
    pred: *const f64,
    target: *const f64,
    h: usize,
    w: usize,
    peak: f64,
    out: *mut f64,
) -> FunkanStatus {
    guard(|| {
        let v = metrics::psnr(&image(pred, h, w, "pred")?, &image(target, h, w, "target")?, peak)?;
        *output(out, "out")? = v;
        Ok(())
    })
}

/// Anisotropic total variation.
///
/// # Safety
/// `img` holds `h*w` doubles.
#[no_mangle]
pub unsafe extern "C" fn funkan_total_variation(img: *const f64, h: usize, w: usize, out: *mut f64) -> FunkanStatus {
    guard(|| {
        let v = metrics::total_variation(&image(img, h, w, "img")?);
        *output(out, "out")? = v;
        Ok(())
    })
}

/// Intersection over union of `sigmoid(logits) > threshold` against `mask >= 0.5`.
///
/// # Safety
/// Both images hold `h*w` doubles.
#[no_mangle]
pub unsafe extern "C" fn funkan_iou(
    logits: *const f64,
    mask: *const f64,
    h: usize,
    w: usize,
    threshold: f64,
    out: *mut f64,
) -> FunkanStatus {
    guard(|| {
        let v = metrics::iou(&image(logits, h, w, "logits")?, &image(mask, h, w, "mask")?, threshold)?;
        *output(out, "out")? = v;
        Ok(())
    })
}

/// Sub-voxel-shift Gibbs ringing removal. Pass 0 for any parameter to use its default.
///
/// # Safety
/// `img` holds `h*w` doubles and `out` has room for as many.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn funkan_kellner_dering(
    img: *const f64,
    h: usize,
    w: usize,
    shifts: usize,
    min_window: usize,
    max_window: usize,
    out: *mut f64,
) -> FunkanStatus {
    guard(|| {
        let d = KellnerParams::default();
        let params = KellnerParams {
            shifts: if shifts == 0 { d.shifts } else { shifts },
            min_window: if min_window == 0 { d.min_window } else { min_window },
            max_window: if max_window == 0 { d.max_window } else { max_window },
        };
        let cleaned = metrics::kellner_dering(&image(img, h, w, "img")?, params)?;
        write_image(&cleaned, out)
    })
}
