//! C ABI for the smoothing, FPCA and regression core.
//!
//! Conventions:
//! - every fallible call returns an [`FdaStatus`]; on failure a message is
//!   available from [`fda_last_error`] on the same thread;
//! - objects are opaque handles created by `*_new`/`*_fit` and released with
//!   the matching `*_free` (passing NULL to a free function is allowed);
//! - matrices cross the boundary as row-major `double` buffers; the caller
//!   supplies the buffer and its length in elements, and gets
//!   `FDA_STATUS_BUFFER_TOO_SMALL` if it is short;
//! - panics never unwind into the caller; they surface as
//!   `FDA_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use fda_core::{FdaError, MfflrConfig};
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Singular = 4,
    Parse = 5,
    Io = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

/// B-spline basis on [0, 1].
pub struct FdaBasis(Arc<fda_core::BasisSystem>);

/// Curves sharing one basis.
pub struct FdaDataset(fda_core::FunctionalDataset);

/// Fitted functional PCA.
pub struct FdaFpca(fda_core::FpcaModel);

/// Fitted principal-component function-on-function regression.
pub struct FdaMfflr(fda_core::MfflrModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

struct Failure(FdaStatus, String);

impl From<FdaError> for Failure {
    fn from(e: FdaError) -> Self {
        let status = match &e {
            FdaError::Parse { .. } | FdaError::DuplicateKey { .. } | FdaError::Json(_) => FdaStatus::Parse,
            FdaError::Domain(_) => FdaStatus::Domain,
            FdaError::Singular { .. } | FdaError::Underdetermined { .. } => FdaStatus::Singular,
            FdaError::Io { .. } | FdaError::MissingArtifact { .. } => FdaStatus::Io,
            _ => FdaStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FdaStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `body`, recording any failure or panic as the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> FdaStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            FdaStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal error: {message}"));
            FdaStatus::Internal
        }
    }
}

unsafe fn get<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: callers pass handles obtained from this library or NULL.
    unsafe { ptr.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    // SAFETY: the caller guarantees `len` readable doubles at `ptr`.
    Ok(unsafe { std::slice::from_raw_parts(ptr, len) })
}

unsafe fn copy_out(src: impl ExactSizeIterator<Item = f64>, out: *mut f64, out_len: usize) -> Result<(), Failure> {
    let needed = src.len();
    if out_len < needed {
        return Err(Failure(
            FdaStatus::BufferTooSmall,
            format!("output buffer holds {out_len} values, {needed} needed"),
        ));
    }
    if needed == 0 {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("output buffer"));
    }
    for (k, v) in src.enumerate() {
        // SAFETY: `out` has room for `out_len >= needed` doubles.
        unsafe { *out.add(k) = v };
    }
    Ok(())
}

fn row_major(m: &DMatrix<f64>) -> impl ExactSizeIterator<Item = f64> + '_ {
    let (rows, cols) = m.shape();
    (0..rows * cols).map(move |k| m[(k / cols, k % cols)])
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    // SAFETY: `out` is a valid location for a handle pointer.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

unsafe fn free<T>(ptr: *mut T) {
    if !ptr.is_null() {
        // SAFETY: `ptr` came from `Box::into_raw` in `store`.
        drop(unsafe { Box::from_raw(ptr) });
    }
}

/// Message describing the last failed call on this thread, or NULL. The
/// pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn fda_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fda_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---- basis ----------------------------------------------------------------

/// Clamped B-spline basis of `order` with `num_basis` functions and equally
/// spaced interior knots.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn fda_basis_new(order: usize, num_basis: usize, out: *mut *mut FdaBasis) -> FdaStatus {
    guard(|| {
        let basis = fda_core::make_bspline_basis(order, num_basis)?;
        unsafe { store(out, FdaBasis(Arc::new(basis))) }
    })
}

/// # Safety
/// `basis` must be NULL or a handle from `fda_basis_new`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fda_basis_free(basis: *mut FdaBasis) {
    unsafe { free(basis) }
}

/// Number of basis functions, or 0 for a NULL handle.
///
/// # Safety
/// `basis` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fda_basis_num_basis(basis: *const FdaBasis) -> usize {
    unsafe { basis.as_ref() }.map_or(0, |b| b.0.num_basis())
}

/// Values of every basis function at `t` into `out` (`num_basis` entries).
///
/// # Safety
/// `basis` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fda_basis_eval(basis: *const FdaBasis, t: f64, out: *mut f64, out_len: usize) -> FdaStatus {
    guard(|| {
        let basis = unsafe { get(basis, "basis") }?;
        let values = basis.0.eval_basis(t)?;
        unsafe { copy_out(values.into_iter(), out, out_len) }
    })
}

/// Gram matrix of L2 inner products, `num_basis × num_basis`, row-major.
///
/// # Safety
/// `basis` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fda_basis_gram(basis: *const FdaBasis, out: *mut f64, out_len: usize) -> FdaStatus {
    guard(|| {
        let basis = unsafe { get(basis, "basis") }?;
        unsafe { copy_out(row_major(basis.0.gram()), out, out_len) }
    })
}

/// Least-squares coefficients of the observations `(ts[k], ys[k])`, plus the
/// mean squared residual in `mse` (may be NULL).
///
/// # Safety
/// `ts` and `ys` must hold `m` doubles, `coeffs` must hold `coeffs_len`.
#[no_mangle]
pub unsafe extern "C" fn fda_basis_fit(
    basis: *const FdaBasis,
    ts: *const f64,
    ys: *const f64,
    m: usize,
    coeffs: *mut f64,
    coeffs_len: usize,
    mse: *mut f64,
) -> FdaStatus {
    guard(|| {
        let basis = unsafe { get(basis, "basis") }?;
        let ts = unsafe { slice(ts, m, "ts") }?;
        let ys = unsafe { slice(ys, m, "ys") }?;
        let fit = fda_core::basis::fit_points(ts, ys, &basis.0)?;
        unsafe { copy_out(fit.datum.coeffs.iter().copied(), coeffs, coeffs_len) }?;
        if let Some(slot) = unsafe { mse.as_mut() } {
            *slot = fit.mse;
        }
        Ok(())
    })
}

// ---- datasets -------------------------------------------------------------

/// `n` curves from a row-major `n × num_basis` coefficient matrix. Curves
/// are labelled by their row index.
///
/// # Safety
/// `basis` must be a live handle, `coeffs` must hold `n * num_basis` doubles.
#[no_mangle]
pub unsafe extern "C" fn fda_dataset_new(
    basis: *const FdaBasis,
    coeffs: *const f64,
    n: usize,
    out: *mut *mut FdaDataset,
) -> FdaStatus {
    guard(|| {
        let basis = unsafe { get(basis, "basis") }?;
        let p = basis.0.num_basis();
        let values = unsafe { slice(coeffs, n * p, "coeffs") }?;
        let matrix = DMatrix::from_row_slice(n, p, values);
        let labels = (0..n).map(|i| i.to_string()).collect();
        let data = fda_core::FunctionalDataset::new(basis.0.clone(), None, labels, matrix)?;
        unsafe { store(out, FdaDataset(data)) }
    })
}

/// Builds a dataset from a JSON document as written by the CLI.
///
/// # Safety
/// `json` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn fda_dataset_from_json(json: *const c_char, out: *mut *mut FdaDataset) -> FdaStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|e| Failure(FdaStatus::Parse, format!("json is not UTF-8: {e}")))?;
        let data: fda_core::FunctionalDataset = serde_json::from_str(text).map_err(FdaError::from)?;
        unsafe { store(out, FdaDataset(data)) }
    })
}

/// # Safety
/// `data` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn fda_dataset_free(data: *mut FdaDataset) {
    unsafe { free(data) }
}

/// Number of curves, or 0 for a NULL handle.
///
/// # Safety
/// `data` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fda_dataset_len(data: *const FdaDataset) -> usize {
    unsafe { data.as_ref() }.map_or(0, |d| d.0.len())
}

/// Coefficients as a row-major `n × num_basis` matrix.
///
/// # Safety
/// `data` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fda_dataset_coefficients(data: *const FdaDataset, out: *mut f64, out_len: usize) -> FdaStatus {
    guard(|| {
        let data = unsafe { get(data, "dataset") }?;
        unsafe { copy_out(row_major(&data.0.coeffs), out, out_len) }
    })
}

/// Curve values at `ts` as a row-major `n × m` matrix.
///
/// # Safety
/// `ts` must hold `m` doubles, `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fda_dataset_eval(
    data: *const FdaDataset,
    ts: *const f64,
    m: usize,
    out: *mut f64,
    out_len: usize,
) -> FdaStatus {
    guard(|| {
        let data = unsafe { get(data, "dataset") }?;
        let ts = unsafe { slice(ts, m, "ts") }?;
        let values = data.0.eval(ts)?;
        unsafe { copy_out(row_major(&values), out, out_len) }
    })
}

// ---- FPCA -----------------------------------------------------------------

/// Functional PCA keeping at most `max_components` components (0 keeps up
/// to `n - 1`).
///
/// # Safety
/// `data` must be a live handle and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn fda_fpca_fit(data: *const FdaDataset, max_components: usize, out: *mut *mut FdaFpca) -> FdaStatus {
    guard(|| {
        let data = unsafe { get(data, "dataset") }?;
        let options = fda_core::FpcaOptions {
            max_components: (max_components > 0).then_some(max_components),
            ..Default::default()
        };
        let model = fda_core::fpca_fit_with(&data.0, options)?;
        unsafe { store(out, FdaFpca(model)) }
    })
}

/// # Safety
/// `model` must be NULL or a live FPCA handle.
#[no_mangle]
pub unsafe extern "C" fn fda_fpca_free(model: *mut FdaFpca) {
    unsafe { free(model) }
}

/// Number of retained components, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fda_fpca_num_components(model: *const FdaFpca) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| m.0.num_components())
}

/// Eigenvalues, largest first (`num_components` entries).
///
/// # Safety
/// `model` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fda_fpca_eigenvalues(model: *const FdaFpca, out: *mut f64, out_len: usize) -> FdaStatus {
    guard(|| {
        let model = unsafe { get(model, "fpca") }?;
        unsafe { copy_out(model.0.eigenvalues.iter().copied(), out, out_len) }
    })
}

/// Share of total variance per component (`num_components` entries).
///
/// # Safety
/// `model` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fda_fpca_explained_variance(model: *const FdaFpca, out: *mut f64, out_len: usize) -> FdaStatus {
    guard(|| {
        let model = unsafe { get(model, "fpca") }?;
        unsafe { copy_out(model.0.var_proportions.iter().copied(), out, out_len) }
    })
}

/// Scores as a row-major `n × num_components` matrix.
///
/// # Safety
/// `model` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fda_fpca_scores(model: *const FdaFpca, out: *mut f64, out_len: usize) -> FdaStatus {
    guard(|| {
        let model = unsafe { get(model, "fpca") }?;
        unsafe { copy_out(row_major(&model.0.scores), out, out_len) }
    })
}

/// Harmonic coefficients as a row-major `num_components × num_basis` matrix.
///
/// # Safety
/// `model` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fda_fpca_harmonics(model: *const FdaFpca, out: *mut f64, out_len: usize) -> FdaStatus {
    guard(|| {
        let model = unsafe { get(model, "fpca") }?;
        unsafe { copy_out(row_major(&model.0.harmonic_coeffs), out, out_len) }
    })
}

// ---- regression -----------------------------------------------------------

unsafe fn datasets(ptrs: *const *const FdaDataset, count: usize) -> Result<Vec<fda_core::FunctionalDataset>, Failure> {
    if count > 0 && ptrs.is_null() {
        return Err(null("predictors"));
    }
    (0..count)
        .map(|j| {
            // SAFETY: `ptrs` holds `count` handle pointers.
            let p = unsafe { *ptrs.add(j) };
            unsafe { get(p, "predictor dataset") }.map(|d| d.0.clone())
        })
        .collect()
}

/// Regresses the first `response_components` response scores on the first
/// `predictor_components` scores of each of the `num_predictors` predictors,
/// with an intercept.
///
/// # Safety
/// `predictors` must hold `num_predictors` live dataset handles.
#[no_mangle]
pub unsafe extern "C" fn fda_mfflr_fit(
    response: *const FdaDataset,
    predictors: *const *const FdaDataset,
    num_predictors: usize,
    response_components: usize,
    predictor_components: usize,
    out: *mut *mut FdaMfflr,
) -> FdaStatus {
    guard(|| {
        let response = unsafe { get(response, "response") }?;
        let xs = unsafe { datasets(predictors, num_predictors) }?;
        let config = MfflrConfig::new(response_components, predictor_components);
        let model = fda_core::fit_mfflr(&response.0, &xs, &config)?;
        unsafe { store(out, FdaMfflr(model)) }
    })
}

/// # Safety
/// `model` must be NULL or a live regression handle.
#[no_mangle]
pub unsafe extern "C" fn fda_mfflr_free(model: *mut FdaMfflr) {
    unsafe { free(model) }
}

/// Shape of the coefficient matrix: `K` rows and `1 + J·L` columns.
///
/// # Safety
/// `rows` and `cols` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn fda_mfflr_shape(model: *const FdaMfflr, rows: *mut usize, cols: *mut usize) -> FdaStatus {
    guard(|| {
        let model = unsafe { get(model, "model") }?;
        let (r, c) = model.0.coeffs.shape();
        match (unsafe { rows.as_mut() }, unsafe { cols.as_mut() }) {
            (Some(rs), Some(cs)) => {
                *rs = r;
                *cs = c;
                Ok(())
            }
            _ => Err(null("shape output")),
        }
    })
}

/// Coefficients, row-major: column 0 is the intercept, then one block of
/// `L` columns per predictor.
///
/// # Safety
/// `model` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fda_mfflr_coefficients(model: *const FdaMfflr, out: *mut f64, out_len: usize) -> FdaStatus {
    guard(|| {
        let model = unsafe { get(model, "model") }?;
        unsafe { copy_out(row_major(&model.0.coeffs), out, out_len) }
    })
}

/// OLS standard errors in the layout of the coefficients.
///
/// # Safety
/// `model` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fda_mfflr_std_errors(model: *const FdaMfflr, out: *mut f64, out_len: usize) -> FdaStatus {
    guard(|| {
        let model = unsafe { get(model, "model") }?;
        unsafe { copy_out(row_major(&model.0.std_errors), out, out_len) }
    })
}

/// Predicted response curves for new predictor curves.
///
/// # Safety
/// `predictors` must hold `num_predictors` live dataset handles.
#[no_mangle]
pub unsafe extern "C" fn fda_mfflr_predict(
    model: *const FdaMfflr,
    predictors: *const *const FdaDataset,
    num_predictors: usize,
    out: *mut *mut FdaDataset,
) -> FdaStatus {
    guard(|| {
        let model = unsafe { get(model, "model") }?;
        let xs = unsafe { datasets(predictors, num_predictors) }?;
        let predicted = fda_core::predict_response(&model.0, &xs)?;
        unsafe { store(out, FdaDataset(predicted)) }
    })
}

/// Serializes the model as JSON into `buf` (NUL-terminated). `required`
/// (may be NULL) receives the buffer size needed including the NUL; call
/// with `buf_len = 0` to query it.
///
/// # Safety
/// `buf` must hold `buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn fda_mfflr_to_json(
    model: *const FdaMfflr,
    buf: *mut c_char,
    buf_len: usize,
    required: *mut usize,
) -> FdaStatus {
    guard(|| {
        let model = unsafe { get(model, "model") }?;
        let json = serde_json::to_string(&model.0).map_err(FdaError::from)?;
        let needed = json.len() + 1;
        if let Some(r) = unsafe { required.as_mut() } {
            *r = needed;
        }
        if buf_len < needed {
            return Err(Failure(
                FdaStatus::BufferTooSmall,
                format!("JSON needs {needed} bytes, buffer has {buf_len}"),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        // SAFETY: `buf` has room for `needed` bytes.
        unsafe {
            std::ptr::copy_nonoverlapping(json.as_ptr(), buf.cast::<u8>(), json.len());
            *buf.add(json.len()) = 0;
        }
        Ok(())
    })
}
