//! C ABI for the mwsn library.
//!
//! Every function returns an [`MwsnStatus`]. On failure a description is
//! available from [`mwsn_last_error`] on the same thread. Objects are opaque
//! handles released by their `_free` function. Matrices are row-major
//! `double` buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use mwsn::classifier::{train, LinearModel, TrainParams};
use mwsn::features::{pca_fit, FeatureMatrix, PcaModel};
use mwsn::scattering::{layer2_features, ScatteringConfig};
use mwsn::spectral::ImageGrid;
use mwsn::tensor::{load_linear, load_pca, save_linear, save_pca};
use mwsn::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwsnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InvalidConfig = 3,
    /// Labels or folds unsuitable for training.
    Data = 4,
    Io = 5,
    Format = 6,
    BufferTooSmall = 7,
    State = 8,
    Panic = 9,
}

/// Scattering configuration bound to one input size.
pub struct MwsnScatterer {
    config: ScatteringConfig,
    size: usize,
    feature_len: usize,
}

pub struct MwsnPca {
    model: PcaModel,
}

pub struct MwsnLinearModel {
    model: LinearModel,
    labels: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(MwsnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidInput(_) | Error::SymmetryViolation { .. } | Error::Crop { .. } => {
                MwsnStatus::InvalidInput
            }
            Error::InvalidScale { .. }
            | Error::Resolution { .. }
            | Error::InvalidConfig(_)
            | Error::InvalidComponentCount { .. } => MwsnStatus::InvalidConfig,
            Error::DegenerateLabels(_) | Error::Stratification { .. } | Error::EmptyDataset => {
                MwsnStatus::Data
            }
            Error::Ingestion { .. } | Error::Io(_) => MwsnStatus::Io,
            Error::Manifest { .. } | Error::Format(_) => MwsnStatus::Format,
            Error::State(_) => MwsnStatus::State,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: MwsnStatus, message: impl Into<String>) -> Failure {
    Failure(status, message.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MwsnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MwsnStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {message}"));
            MwsnStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(fail(MwsnStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    // SAFETY: the caller guarantees `len` readable values at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn matrix(x: *const f64, rows: usize, cols: usize) -> Result<FeatureMatrix, Failure> {
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| fail(MwsnStatus::InvalidInput, "matrix size overflows"))?;
    let values = unsafe { slice(x, len, "matrix") }?.to_vec();
    Ok(FeatureMatrix::new(rows, cols, values)?)
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Failure> {
    non_null(path, "path")?;
    // SAFETY: the caller passes a NUL-terminated string.
    let s = unsafe { CStr::from_ptr(path) }
        .to_str()
        .map_err(|_| fail(MwsnStatus::InvalidInput, "path is not UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    non_null(out, "output pointer")?;
    // SAFETY: checked non-null; the caller provides writable storage.
    unsafe { out.write(value) };
    Ok(())
}

unsafe fn handle<'a, T>(h: *const T, name: &str) -> Result<&'a T, Failure> {
    non_null(h, name)?;
    // SAFETY: handles come from this library and are live until freed.
    Ok(unsafe { &*h })
}

fn check_capacity(needed: usize, given: usize) -> Result<(), Failure> {
    if given < needed {
        return Err(fail(
            MwsnStatus::BufferTooSmall,
            format!("output buffer holds {given} values, {needed} needed"),
        ));
    }
    Ok(())
}

/// Description of the last failure on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn mwsn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mwsn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a scatterer for `size × size` inputs.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn mwsn_scatterer_new(
    size: usize,
    scales: usize,
    rate_u: usize,
    rate_s: usize,
    out: *mut *mut MwsnScatterer,
) -> MwsnStatus {
    guard(|| {
        non_null(out, "out")?;
        let config = ScatteringConfig {
            scales,
            rate_u,
            rate_s,
            ..ScatteringConfig::default()
        };
        let feature_len = config.feature_len(size)?;
        let h = Box::new(MwsnScatterer {
            config,
            size,
            feature_len,
        });
        unsafe { write_out(out, Box::into_raw(h)) }
    })
}

/// # Safety
/// `h` must be a live scatterer and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn mwsn_scatterer_feature_len(
    h: *const MwsnScatterer,
    len: *mut usize,
) -> MwsnStatus {
    guard(|| {
        let h = unsafe { handle(h, "scatterer") }?;
        unsafe { write_out(len, h.feature_len) }
    })
}

/// Layer-2 features of one `size × size` image into `out[0..out_len)`.
///
/// # Safety
/// `image` must hold `size²` values and `out` `out_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn mwsn_scatterer_features(
    h: *const MwsnScatterer,
    image: *const f64,
    out: *mut f64,
    out_len: usize,
) -> MwsnStatus {
    guard(|| {
        let h = unsafe { handle(h, "scatterer") }?;
        non_null(out, "out")?;
        check_capacity(h.feature_len, out_len)?;
        let pixels = unsafe { slice(image, h.size * h.size, "image") }?;
        let img = ImageGrid::new(h.size, h.size, pixels.to_vec())?;
        let features = layer2_features(&img, &h.config)?;
        // SAFETY: capacity checked above.
        unsafe { std::slice::from_raw_parts_mut(out, h.feature_len) }.copy_from_slice(&features);
        Ok(())
    })
}

/// # Safety
/// `h` must come from `mwsn_scatterer_new` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn mwsn_scatterer_free(h: *mut MwsnScatterer) {
    if !h.is_null() {
        drop(unsafe { Box::from_raw(h) });
    }
}

/// Fits PCA with `k` components on a `rows × cols` matrix.
///
/// # Safety
/// `x` must hold `rows·cols` values; `out` must be a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn mwsn_pca_fit(
    x: *const f64,
    rows: usize,
    cols: usize,
    k: usize,
    out: *mut *mut MwsnPca,
) -> MwsnStatus {
    guard(|| {
        non_null(out, "out")?;
        let model = pca_fit(&unsafe { matrix(x, rows, cols) }?, k)?;
        unsafe { write_out(out, Box::into_raw(Box::new(MwsnPca { model }))) }
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn mwsn_pca_load(path: *const c_char, out: *mut *mut MwsnPca) -> MwsnStatus {
    guard(|| {
        non_null(out, "out")?;
        let model = load_pca(unsafe { path_arg(path) }?)?;
        unsafe { write_out(out, Box::into_raw(Box::new(MwsnPca { model }))) }
    })
}

/// # Safety
/// `h` must be live; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mwsn_pca_save(h: *const MwsnPca, path: *const c_char) -> MwsnStatus {
    guard(|| {
        let h = unsafe { handle(h, "pca") }?;
        Ok(save_pca(unsafe { path_arg(path) }?, &h.model)?)
    })
}

/// Input dimension and component count.
///
/// # Safety
/// `h` must be live; `dim` and `k` writable.
#[no_mangle]
pub unsafe extern "C" fn mwsn_pca_dims(
    h: *const MwsnPca,
    dim: *mut usize,
    k: *mut usize,
) -> MwsnStatus {
    guard(|| {
        let h = unsafe { handle(h, "pca") }?;
        unsafe { write_out(dim, h.model.dim()) }?;
        unsafe { write_out(k, h.model.n_components()) }
    })
}

/// Explained variances into `out[0..k)`.
///
/// # Safety
/// `h` must be live; `out` must hold `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn mwsn_pca_explained(
    h: *const MwsnPca,
    out: *mut f64,
    out_len: usize,
) -> MwsnStatus {
    guard(|| {
        let h = unsafe { handle(h, "pca") }?;
        non_null(out, "out")?;
        let ev = h.model.explained();
        check_capacity(ev.len(), out_len)?;
        unsafe { std::slice::from_raw_parts_mut(out, ev.len()) }.copy_from_slice(ev);
        Ok(())
    })
}

/// Projects a `rows × cols` matrix to `rows × k` in `out`.
///
/// # Safety
/// `x` must hold `rows·cols` values and `out` `out_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn mwsn_pca_transform(
    h: *const MwsnPca,
    x: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
    out_len: usize,
) -> MwsnStatus {
    guard(|| {
        let h = unsafe { handle(h, "pca") }?;
        non_null(out, "out")?;
        let projected = h.model.transform(&unsafe { matrix(x, rows, cols) }?)?;
        check_capacity(projected.values().len(), out_len)?;
        unsafe { std::slice::from_raw_parts_mut(out, projected.values().len()) }
            .copy_from_slice(projected.values());
        Ok(())
    })
}

/// # Safety
/// `h` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn mwsn_pca_free(h: *mut MwsnPca) {
    if !h.is_null() {
        drop(unsafe { Box::from_raw(h) });
    }
}

fn wrap_linear(model: LinearModel) -> Result<*mut MwsnLinearModel, Failure> {
    let labels = model
        .classes()
        .iter()
        .map(|c| {
            CString::new(c.as_str())
                .map_err(|_| fail(MwsnStatus::InvalidInput, "label contains NUL"))
        })
        .collect::<Result<_, _>>()?;
    Ok(Box::into_raw(Box::new(MwsnLinearModel { model, labels })))
}

/// Trains the one-vs-rest linear classifier. `labels` holds `rows`
/// NUL-terminated strings.
///
/// # Safety
/// `x` must hold `rows·cols` values, `labels` `rows` valid strings and `out`
/// must be a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn mwsn_linear_train(
    x: *const f64,
    rows: usize,
    cols: usize,
    labels: *const *const c_char,
    c_reg: f64,
    seed: u64,
    out: *mut *mut MwsnLinearModel,
) -> MwsnStatus {
    guard(|| {
        non_null(out, "out")?;
        let x = unsafe { matrix(x, rows, cols) }?;
        non_null(labels, "labels")?;
        let ptrs = unsafe { std::slice::from_raw_parts(labels, rows) };
        let names = ptrs
            .iter()
            .map(|&p| {
                non_null(p, "label")?;
                unsafe { CStr::from_ptr(p) }
                    .to_str()
                    .map(str::to_owned)
                    .map_err(|_| fail(MwsnStatus::InvalidInput, "label is not UTF-8"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let params = TrainParams {
            c_reg,
            seed,
            ..TrainParams::default()
        };
        let model = train(&x, &names, &params)?;
        unsafe { write_out(out, wrap_linear(model)?) }
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn mwsn_linear_load(
    path: *const c_char,
    out: *mut *mut MwsnLinearModel,
) -> MwsnStatus {
    guard(|| {
        non_null(out, "out")?;
        let model = load_linear(unsafe { path_arg(path) }?)?;
        unsafe { write_out(out, wrap_linear(model)?) }
    })
}

/// # Safety
/// `h` must be live; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mwsn_linear_save(
    h: *const MwsnLinearModel,
    path: *const c_char,
) -> MwsnStatus {
    guard(|| {
        let h = unsafe { handle(h, "model") }?;
        Ok(save_linear(unsafe { path_arg(path) }?, &h.model)?)
    })
}

/// Number of classes and feature dimension.
///
/// # Safety
/// `h` must be live; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn mwsn_linear_dims(
    h: *const MwsnLinearModel,
    classes: *mut usize,
    dim: *mut usize,
) -> MwsnStatus {
    guard(|| {
        let h = unsafe { handle(h, "model") }?;
        unsafe { write_out(classes, h.model.classes().len()) }?;
        unsafe { write_out(dim, h.model.dim()) }
    })
}

/// Label of class `index`, owned by the model.
///
/// # Safety
/// `h` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mwsn_linear_class_label(
    h: *const MwsnLinearModel,
    index: usize,
    out: *mut *const c_char,
) -> MwsnStatus {
    guard(|| {
        let h = unsafe { handle(h, "model") }?;
        let label = h.labels.get(index).ok_or_else(|| {
            fail(
                MwsnStatus::InvalidInput,
                format!("class index {index} out of range"),
            )
        })?;
        unsafe { write_out(out, label.as_ptr()) }
    })
}

/// Predicted class index of each row into `out[0..rows)`.
///
/// # Safety
/// `x` must hold `rows·cols` values and `out` `out_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn mwsn_linear_predict(
    h: *const MwsnLinearModel,
    x: *const f64,
    rows: usize,
    cols: usize,
    out: *mut usize,
    out_len: usize,
) -> MwsnStatus {
    guard(|| {
        let h = unsafe { handle(h, "model") }?;
        non_null(out, "out")?;
        check_capacity(rows, out_len)?;
        let predicted = h
            .model
            .predict_indices(&unsafe { matrix(x, rows, cols) }?)?;
        unsafe { std::slice::from_raw_parts_mut(out, rows) }.copy_from_slice(&predicted);
        Ok(())
    })
}

/// # Safety
/// `h` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn mwsn_linear_free(h: *mut MwsnLinearModel) {
    if !h.is_null() {
        drop(unsafe { Box::from_raw(h) });
    }
}
