//! C ABI over the debtcast core.
//!
//! Handles (`DcMatrix`, `DcModel`) are opaque and owned by the caller, who
//! releases them with the matching `*_free`. Every fallible function returns a
//! [`DcStatus`]; on failure `dc_last_error()` describes the error for the
//! calling thread. Output pointers are written only on success. Panics never
//! cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use debtcast::eval::{self, cross_validate, make_folds, EvalError, Grouping};
use debtcast::features::{build_matrix, impute_median, DesignMatrix, DistributionPolicy, FeatureError, TargetKind};
use debtcast::ingest::parse_snapshot_csv;
use debtcast::matrix::Matrix;
use debtcast::regress::{fit, FittedModel, Hyperparameters, RegressError, RegressorConfig, RegressorKind};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Shape = 5,
    Precondition = 6,
    UndefinedScore = 7,
    Panic = 99,
}

/// Feature rows, a target vector and per-row group labels.
pub struct DcMatrix {
    design: DesignMatrix,
    has_target: bool,
}

/// A fitted regressor.
pub struct DcModel {
    model: FittedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let clean = message.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).expect("nul bytes removed"));
}

struct Failure(DcStatus, String);

impl From<RegressError> for Failure {
    fn from(e: RegressError) -> Self {
        let status = match e {
            RegressError::Config(_) => DcStatus::InvalidArgument,
            RegressError::Precondition(_) => DcStatus::Precondition,
            RegressError::Shape(_) => DcStatus::Shape,
            RegressError::Format(_) => DcStatus::Parse,
        };
        Failure(status, e.to_string())
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Regress(r) => r.into(),
            EvalError::UndefinedScore(_) => Failure(DcStatus::UndefinedScore, e.to_string()),
            EvalError::Fold(_) => Failure(DcStatus::InvalidArgument, e.to_string()),
            EvalError::Precondition(_) => Failure(DcStatus::Precondition, e.to_string()),
        }
    }
}

impl From<FeatureError> for Failure {
    fn from(e: FeatureError) -> Self {
        Failure(DcStatus::Parse, e.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> DcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            DcStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DcStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(DcStatus::NullPointer, format!("`{what}` is null"))
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(DcStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

/// # Safety
/// `p` is null or points to `len` readable doubles.
unsafe fn doubles<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` is null or a live handle from this library.
unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn give<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    // SAFETY: `out` is non-null and the caller provides a writable slot.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    // SAFETY: as in `give`.
    unsafe { *out = value };
    Ok(())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn dc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn dc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a matrix from `rows × cols` row-major doubles. NaN marks a missing
/// cell. `target` (length `rows`) may be null for prediction-only matrices.
///
/// # Safety
/// `data` points to `rows * cols` doubles; `target` is null or points to
/// `rows` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dc_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    target: *const f64,
    out: *mut *mut DcMatrix,
) -> DcStatus {
    guard(|| {
        let cells = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure(DcStatus::Shape, "rows * cols overflows".into()))?;
        let x = Matrix::new(rows, cols, doubles(data, cells, "data")?.to_vec())
            .map_err(|e| Failure(DcStatus::Shape, e.to_string()))?;
        let (y, has_target) = if target.is_null() {
            (vec![0.0; rows], false)
        } else {
            (doubles(target, rows, "target")?.to_vec(), true)
        };
        let design = DesignMatrix::from_xy(x, y)?;
        give(out, DcMatrix { design, has_target })
    })
}

/// Loads a snapshot CSV. `target` is `"maintainability"` or `"reliability"`;
/// distribution cells are reduced by weighted sum. Cells stay missing.
///
/// # Safety
/// `path` and `target` are NUL-terminated strings; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dc_matrix_from_csv(
    path: *const c_char,
    target: *const c_char,
    out: *mut *mut DcMatrix,
) -> DcStatus {
    guard(|| {
        let path = text(path, "path")?;
        let kind: TargetKind = text(target, "target")?
            .parse()
            .map_err(|e: String| Failure(DcStatus::InvalidArgument, e))?;
        let bytes = std::fs::read(path).map_err(|e| Failure(DcStatus::Io, format!("{path}: {e}")))?;
        let snaps = parse_snapshot_csv(&bytes).map_err(|e| Failure(DcStatus::Parse, e.to_string()))?;
        let design = build_matrix(&snaps, kind, DistributionPolicy::WeightedSum)?;
        give(out, DcMatrix { design, has_target: true })
    })
}

/// Row count, or 0 for a null handle.
///
/// # Safety
/// `m` is null or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn dc_matrix_rows(m: *const DcMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.design.n_rows())
}

/// Column count, or 0 for a null handle.
///
/// # Safety
/// `m` is null or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn dc_matrix_cols(m: *const DcMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.design.n_features())
}

/// Fills missing cells in place with column medians over all rows.
///
/// # Safety
/// `m` is a live matrix handle not used concurrently.
#[no_mangle]
pub unsafe extern "C" fn dc_matrix_impute_median(m: *mut DcMatrix) -> DcStatus {
    guard(|| {
        let m = m.as_mut().ok_or_else(|| null("matrix"))?;
        let all: Vec<usize> = (0..m.design.n_rows()).collect();
        m.design = impute_median(&m.design, &all);
        Ok(())
    })
}

/// # Safety
/// `m` is null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dc_matrix_free(m: *mut DcMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `kind` is a NUL-terminated string; `params_json` is null or one.
unsafe fn config(kind: *const c_char, params_json: *const c_char, seed: u64) -> Result<RegressorConfig, Failure> {
    let kind: RegressorKind = text(kind, "kind")?.parse()?;
    let mut cfg = RegressorConfig::new(kind, seed);
    if !params_json.is_null() {
        let extra: Hyperparameters = serde_json::from_str(text(params_json, "params_json")?)
            .map_err(|e| Failure(DcStatus::Parse, format!("params_json: {e}")))?;
        cfg.hyperparameters.extend(extra);
    }
    Ok(cfg)
}

fn with_target(m: &DcMatrix) -> Result<&DesignMatrix, Failure> {
    if m.has_target {
        Ok(&m.design)
    } else {
        Err(Failure(DcStatus::Precondition, "matrix has no target".into()))
    }
}

/// Fits regressor `kind` (e.g. `"random_forest"`) with optional JSON
/// hyperparameter overrides such as `{"n_estimators": 50}`.
///
/// # Safety
/// String arguments are NUL-terminated (`params_json` may be null); `m` is a
/// live matrix handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dc_model_fit(
    kind: *const c_char,
    params_json: *const c_char,
    seed: u64,
    m: *const DcMatrix,
    out: *mut *mut DcModel,
) -> DcStatus {
    guard(|| {
        let cfg = config(kind, params_json, seed)?;
        let d = with_target(handle(m, "matrix")?)?;
        let model = fit(&cfg, d.rows(), d.target(), Some(d.feature_names()))?;
        give(out, DcModel { model })
    })
}

/// Writes one prediction per row of `m` into `out[0..out_len)`; `out_len`
/// must equal the row count.
///
/// # Safety
/// `model` and `m` are live handles; `out` points to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dc_model_predict(
    model: *const DcModel,
    m: *const DcMatrix,
    out: *mut f64,
    out_len: usize,
) -> DcStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let m = handle(m, "matrix")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if out_len != m.design.n_rows() {
            return Err(Failure(
                DcStatus::Shape,
                format!("output holds {out_len} values, matrix has {} rows", m.design.n_rows()),
            ));
        }
        let predicted = model.model.predict(m.design.rows())?;
        std::slice::from_raw_parts_mut(out, out_len).copy_from_slice(&predicted);
        Ok(())
    })
}

/// Serializes the model; free the string with `dc_string_free`.
///
/// # Safety
/// `model` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dc_model_to_json(model: *const DcModel, out: *mut *mut c_char) -> DcStatus {
    guard(|| {
        let json = handle(model, "model")?.model.to_json();
        let s = CString::new(json).map_err(|_| Failure(DcStatus::Parse, "nul byte in JSON".into()))?;
        put(out, s.into_raw())
    })
}

/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dc_model_from_json(json: *const c_char, out: *mut *mut DcModel) -> DcStatus {
    guard(|| {
        let model = FittedModel::from_json(text(json, "json")?)?;
        give(out, DcModel { model })
    })
}

/// # Safety
/// `model` is null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dc_model_free(model: *mut DcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `s` is null or a string returned by this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Mean absolute error of two length-`n` vectors.
///
/// # Safety
/// `actual` and `predicted` point to `n` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dc_mae(actual: *const f64, predicted: *const f64, n: usize, out: *mut f64) -> DcStatus {
    guard(|| {
        let v = eval::mae(doubles(actual, n, "actual")?, doubles(predicted, n, "predicted")?)?;
        put(out, v)
    })
}

/// Coefficient of determination of two length-`n` vectors.
///
/// # Safety
/// As for [`dc_mae`].
#[no_mangle]
pub unsafe extern "C" fn dc_r_squared(actual: *const f64, predicted: *const f64, n: usize, out: *mut f64) -> DcStatus {
    guard(|| {
        let v = eval::r_squared(doubles(actual, n, "actual")?, doubles(predicted, n, "predicted")?)?;
        put(out, v)
    })
}

/// Mean and spread of fold scores from `k`-fold cross-validation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DcCvScores {
    pub mae: f64,
    pub mae_std: f64,
    pub r2: f64,
    pub r2_std: f64,
}

/// Shuffled-row (`by_project == 0`) or project-grouped `k`-fold
/// cross-validation with fold-local median imputation.
///
/// # Safety
/// As for [`dc_model_fit`]; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dc_cross_validate(
    kind: *const c_char,
    params_json: *const c_char,
    seed: u64,
    m: *const DcMatrix,
    k: usize,
    by_project: i32,
    out: *mut DcCvScores,
) -> DcStatus {
    guard(|| {
        let cfg = config(kind, params_json, seed)?;
        let d = with_target(handle(m, "matrix")?)?;
        let grouping = if by_project != 0 { Grouping::ByProject } else { Grouping::RowShuffle };
        let plan = make_folds(d.n_rows(), k, seed, grouping, Some(d.groups()))?;
        let row = cross_validate(&cfg, d, &plan)?;
        put(
            out,
            DcCvScores {
                mae: row.mae,
                mae_std: row.mae_std,
                r2: row.r2,
                r2_std: row.r2_std,
            },
        )
    })
}
