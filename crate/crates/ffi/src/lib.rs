//! C ABI over the neural-operator core: opaque handles, integer status
//! codes, and a per-thread last-error message.
//!
//! Conventions, mirrored in the generated `include/lnop.h`:
//! * every fallible call returns an [`LnopStatus`]; `LNOP_STATUS_OK` is 0
//!   and the nonzero codes match the CLI's exit codes (1 usage, 2
//!   numerical, 3 I/O or format);
//! * on failure, [`lnop_last_error`] returns a message valid on the
//!   calling thread until its next failing `lnop_` call;
//! * handles returned through out-pointers are owned by the caller and
//!   must be released with the matching `_free` function exactly once;
//! * field buffers are dense row-major `double` arrays with the channel
//!   axis leading, the layout the core uses throughout.
//!
//! Panics never cross the boundary: they are caught, reported as
//! `LNOP_STATUS_NUMERICAL`, and leave the handles untouched.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use lnop_core::data::container::dataset_read;
use lnop_core::data::PdeDataset;
use lnop_core::model::OperatorModel;
use lnop_core::tensor::Tensor;
use lnop_core::Error;

/// Result code of every fallible call; numerically aligned with the
/// command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LnopStatus {
    /// Success.
    Ok = 0,
    /// Invalid arguments, null pointers, or config errors.
    Usage = 1,
    /// Numerical failure, including a caught internal panic.
    Numerical = 2,
    /// File I/O or format errors.
    Io = 3,
}

/// Which field of a stored sample to copy.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LnopField {
    /// The conditioning input field.
    Input = 0,
    /// The solution target field.
    Target = 1,
}

/// Opaque trained-model handle.
pub struct LnopModel(OperatorModel);

/// Opaque dataset handle.
pub struct LnopDataset(PdeDataset);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn fail(e: &Error) -> LnopStatus {
    set_error(e.to_string());
    match e.exit_code() {
        1 => LnopStatus::Usage,
        2 => LnopStatus::Numerical,
        _ => LnopStatus::Io,
    }
}

fn usage(msg: &str) -> LnopStatus {
    set_error(msg.to_string());
    LnopStatus::Usage
}

/// Runs a body under `catch_unwind` so a panic surfaces as a status.
fn guarded(f: impl FnOnce() -> LnopStatus) -> LnopStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            LnopStatus::Numerical
        }
    }
}

/// Reads a required UTF-8 path argument.
///
/// # Safety
/// `ptr` must be null or a NUL-terminated string.
unsafe fn path_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a Path, LnopStatus> {
    if ptr.is_null() {
        return Err(usage(&format!("{name} is null")));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => Err(usage(&format!("{name} is not valid UTF-8"))),
    }
}

/// Message of the most recent failure on this thread, or null if the
/// last call succeeded. The pointer stays valid until the next failing
/// `lnop_` call on the same thread.
///
/// # Safety
/// The returned pointer must not be freed or written through.
#[no_mangle]
pub unsafe extern "C" fn lnop_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|c| c.as_ptr())
            .unwrap_or(std::ptr::null())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lnop_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// Loads a model checkpoint. On success writes a handle to `out`; the
/// caller owns it and must release it with [`lnop_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lnop_model_load(
    path: *const c_char,
    out: *mut *mut LnopModel,
) -> LnopStatus {
    guarded(|| {
        if out.is_null() {
            return usage("out is null");
        }
        let path = match path_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match OperatorModel::load(path) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(LnopModel(model)));
                LnopStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Writes a model checkpoint to `path`.
///
/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lnop_model_save(
    model: *const LnopModel,
    path: *const c_char,
) -> LnopStatus {
    guarded(|| {
        if model.is_null() {
            return usage("model is null");
        }
        let path = match path_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match (*model).0.save(path) {
            Ok(()) => LnopStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Releases a model handle. Passing null is a no-op.
///
/// # Safety
/// `model` must be a handle from this library, released at most once.
#[no_mangle]
pub unsafe extern "C" fn lnop_model_free(model: *mut LnopModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of spatial axes the model was trained on, or 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lnop_model_rank(model: *const LnopModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).0.config.train_dims.len()
}

/// Training-grid extent along `axis`, or 0 when out of range.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lnop_model_train_extent(model: *const LnopModel, axis: usize) -> usize {
    if model.is_null() {
        return 0;
    }
    let model = &(*model).0;
    model.config.train_dims.get(axis).copied().unwrap_or(0)
}

/// Input channels the model expects (before its internal coordinate
/// channels), or 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lnop_model_in_channels(model: *const LnopModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).0.config.in_channels
}

/// Output channels the model produces, or 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lnop_model_out_channels(model: *const LnopModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).0.config.out_channels
}

unsafe fn forward_impl(
    model: *const LnopModel,
    extents: *const usize,
    rank: usize,
    input: *const f64,
    input_len: usize,
    output: *mut f64,
    output_len: usize,
    superres: bool,
) -> LnopStatus {
    if model.is_null() {
        return usage("model is null");
    }
    if extents.is_null() || input.is_null() || output.is_null() {
        return usage("extents, input, and output must be non-null");
    }
    let model = &(*model).0;
    if rank != model.config.train_dims.len() {
        return usage(&format!(
            "rank {rank} does not match the model's {} spatial axes",
            model.config.train_dims.len()
        ));
    }
    let extents = std::slice::from_raw_parts(extents, rank);
    let grid: usize = extents.iter().product();
    if input_len != model.config.in_channels * grid {
        return usage(&format!(
            "input_len {input_len} != in_channels {} * grid {grid}",
            model.config.in_channels
        ));
    }
    if output_len != model.config.out_channels * grid {
        return usage(&format!(
            "output_len {output_len} != out_channels {} * grid {grid}",
            model.config.out_channels
        ));
    }
    if !superres && extents != model.config.train_dims.as_slice() {
        return usage(&format!(
            "extents {extents:?} differ from the training grid {:?}; \
             use lnop_model_superres for other resolutions",
            model.config.train_dims
        ));
    }
    let mut shape = vec![model.config.in_channels];
    shape.extend_from_slice(extents);
    let data = std::slice::from_raw_parts(input, input_len).to_vec();
    let tensor = match Tensor::new(shape, data) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    let result = if superres {
        model.forward_superres(&tensor)
    } else {
        model.forward(&tensor)
    };
    match result {
        Ok(pred) => {
            std::slice::from_raw_parts_mut(output, output_len).copy_from_slice(pred.data());
            LnopStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Runs the model on one input field at its training resolution.
///
/// `input` holds `in_channels * prod(extents)` doubles, channel axis
/// leading; `output` receives `out_channels * prod(extents)` doubles on
/// the same grid.
///
/// # Safety
/// `model` must be a live handle; `extents` must point to `rank`
/// entries; `input` and `output` must point to `input_len` and
/// `output_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lnop_model_forward(
    model: *const LnopModel,
    extents: *const usize,
    rank: usize,
    input: *const f64,
    input_len: usize,
    output: *mut f64,
    output_len: usize,
) -> LnopStatus {
    guarded(|| forward_impl(model, extents, rank, input, input_len, output, output_len, false))
}

/// Runs the model on a grid other than its training resolution; each
/// extent must be a positive integer multiple (or equal) per axis.
/// Layout contract as in [`lnop_model_forward`].
///
/// # Safety
/// Same contracts as [`lnop_model_forward`].
#[no_mangle]
pub unsafe extern "C" fn lnop_model_superres(
    model: *const LnopModel,
    extents: *const usize,
    rank: usize,
    input: *const f64,
    input_len: usize,
    output: *mut f64,
    output_len: usize,
) -> LnopStatus {
    guarded(|| forward_impl(model, extents, rank, input, input_len, output, output_len, true))
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

/// Opens a dataset container. On success writes a handle to `out`; the
/// caller owns it and must release it with [`lnop_dataset_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lnop_dataset_read(
    path: *const c_char,
    out: *mut *mut LnopDataset,
) -> LnopStatus {
    guarded(|| {
        if out.is_null() {
            return usage("out is null");
        }
        let path = match path_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match dataset_read(path) {
            Ok(ds) => {
                *out = Box::into_raw(Box::new(LnopDataset(ds)));
                LnopStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Releases a dataset handle. Passing null is a no-op.
///
/// # Safety
/// `ds` must be a handle from this library, released at most once.
#[no_mangle]
pub unsafe extern "C" fn lnop_dataset_free(ds: *mut LnopDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of samples, or 0 for null.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lnop_dataset_len(ds: *const LnopDataset) -> usize {
    if ds.is_null() {
        return 0;
    }
    (*ds).0.len()
}

/// Number of spatial axes, or 0 for null.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lnop_dataset_rank(ds: *const LnopDataset) -> usize {
    if ds.is_null() {
        return 0;
    }
    (*ds).0.extents().len()
}

/// Grid extent along `axis`, or 0 when out of range.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lnop_dataset_extent(ds: *const LnopDataset, axis: usize) -> usize {
    if ds.is_null() {
        return 0;
    }
    let ds = &(*ds).0;
    ds.extents().get(axis).copied().unwrap_or(0)
}

/// Channels of the input fields, or 0 for null.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lnop_dataset_in_channels(ds: *const LnopDataset) -> usize {
    if ds.is_null() {
        return 0;
    }
    (*ds).0.in_channels()
}

/// Channels of the target fields, or 0 for null.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lnop_dataset_out_channels(ds: *const LnopDataset) -> usize {
    if ds.is_null() {
        return 0;
    }
    (*ds).0.out_channels()
}

/// Copies one field of sample `index` into `buffer` (channel axis
/// leading, row-major). `buffer_len` must equal the field's channel
/// count times the grid size.
///
/// # Safety
/// `ds` must be a live handle and `buffer` must point to `buffer_len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn lnop_dataset_copy_sample(
    ds: *const LnopDataset,
    index: usize,
    field: LnopField,
    buffer: *mut f64,
    buffer_len: usize,
) -> LnopStatus {
    guarded(|| {
        if ds.is_null() {
            return usage("ds is null");
        }
        if buffer.is_null() {
            return usage("buffer is null");
        }
        let ds = &(*ds).0;
        let Some(sample) = ds.samples.get(index) else {
            return usage(&format!("index {index} out of range for {} samples", ds.len()));
        };
        let tensor = match field {
            LnopField::Input => &sample.input,
            LnopField::Target => &sample.target,
        };
        if buffer_len != tensor.numel() {
            return usage(&format!(
                "buffer_len {buffer_len} != field size {}",
                tensor.numel()
            ));
        }
        std::slice::from_raw_parts_mut(buffer, buffer_len).copy_from_slice(tensor.data());
        LnopStatus::Ok
    })
}
