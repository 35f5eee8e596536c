//! C ABI over steinloss-core. Every call returns an `SlStatus`; on failure
//! `sl_last_error_message` describes the error for the calling thread.
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use steinloss::calculus::VectorFieldSpec;
use steinloss::cli::config::RiskOverrides;
use steinloss::cli::presets;
use steinloss::cli::config::RiskOutcome;
use steinloss::loss_estimators::sure_known_var;
use steinloss::model_selection::{cp_star, select, LinearModelData, Selection};
use steinloss::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Singular = 3,
    RankDeficient = 4,
    IndexOutOfRange = 5,
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> SlStatus {
    match err {
        Error::RankDeficient { .. } => SlStatus::RankDeficient,
        Error::ShrinkageSingularity | Error::StencilOnSingularity { .. } | Error::RejectionLimit { .. } => SlStatus::Singular,
        _ => SlStatus::InvalidArgument,
    }
}

struct Fail(SlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SlStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, records its error, and converts panics into `Internal`.
fn guard(f: impl FnOnce() -> std::result::Result<(), Fail>) -> SlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SlStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SlStatus::Internal
        }
    }
}

unsafe fn slice_in<'a>(p: *const f64, len: usize, what: &str) -> std::result::Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> std::result::Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static version string.
#[no_mangle]
pub extern "C" fn sl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// SURE `p + 2 div g + |g|²` of `x - c x/|x|²` at `x` (length `p`).
///
/// # Safety
/// `x` must point to `p` doubles and `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn sl_sure_james_stein(x: *const f64, p: usize, c: f64, out: *mut f64) -> SlStatus {
    guard(|| {
        let x = slice_in(x, p, "x")?;
        if p == 0 {
            return Err(Fail(SlStatus::InvalidArgument, "p must be positive".into()));
        }
        let g = VectorFieldSpec::JsShrinkage { c }.build(p)?;
        write_out(out, sure_known_var(&g, x)?, "out")
    })
}

/// `|y - fitted|²/n + 2 div σ̂²/n`.
///
/// # Safety
/// `y` and `fitted` must point to `n` doubles, `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn sl_cp_star(
    y: *const f64,
    fitted: *const f64,
    n: usize,
    divergence: f64,
    sigma2_hat: f64,
    out: *mut f64,
) -> SlStatus {
    guard(|| {
        let y = slice_in(y, n, "y")?;
        let f = slice_in(fitted, n, "fitted")?;
        write_out(out, cp_star(y, f, divergence, sigma2_hat)?, "out")
    })
}

/// Regression data `y = V β + ε`.
pub struct SlModel(LinearModelData);

/// Copies `y` (length `n`) and the row-major `n x p` design `v`; with
/// `intercept` a column of ones is prepended.
///
/// # Safety
/// `y` must point to `n` doubles, `v` to `n * p`, `out` to a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_model_new(
    y: *const f64,
    v: *const f64,
    n: usize,
    p: usize,
    intercept: bool,
    out: *mut *mut SlModel,
) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cells = n.checked_mul(p).ok_or_else(|| Fail(SlStatus::InvalidArgument, "n * p overflows".into()))?;
        let y = slice_in(y, n, "y")?.to_vec();
        let v = slice_in(v, cells, "v")?;
        let names: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
        let mut cols: Vec<(&str, Vec<f64>)> = Vec::with_capacity(p + 1);
        if intercept {
            cols.push(("intercept", vec![1.0; n]));
        }
        for (j, name) in names.iter().enumerate() {
            cols.push((name, (0..n).map(|i| v[i * p + j]).collect()));
        }
        let data = LinearModelData::from_columns(y, &cols)?;
        out.write(Box::into_raw(Box::new(SlModel(data))));
        Ok(())
    })
}

/// # Safety
/// `model` must come from `sl_model_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sl_model_free(model: *mut SlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Cp* table over a λ grid.
pub struct SlSelection(Selection);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SlCpRow {
    pub lambda: f64,
    pub rss: f64,
    pub df: f64,
    pub cp_star: f64,
}

/// Ridge fits over `lambdas`; `sigma2_hat` NaN means the residual estimate.
///
/// # Safety
/// `model` must be live, `lambdas` must point to `count` doubles, `out` to a
/// writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_ridge_select(
    model: *const SlModel,
    lambdas: *const f64,
    count: usize,
    sigma2_hat: f64,
    out: *mut *mut SlSelection,
) -> SlStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let lambdas = slice_in(lambdas, count, "lambdas")?;
        let s2 = if sigma2_hat.is_nan() { None } else { Some(sigma2_hat) };
        let sel = select(&model.0, lambdas, s2)?;
        out.write(Box::into_raw(Box::new(SlSelection(sel))));
        Ok(())
    })
}

/// # Safety
/// `sel` must be live; `lambda`, `sigma2_hat` writable (either may be null).
#[no_mangle]
pub unsafe extern "C" fn sl_selection_chosen(sel: *const SlSelection, lambda: *mut f64, sigma2_hat: *mut f64) -> SlStatus {
    guard(|| {
        let sel = &sel.as_ref().ok_or_else(|| null("sel"))?.0;
        if !lambda.is_null() {
            lambda.write(sel.chosen_lambda);
        }
        if !sigma2_hat.is_null() {
            sigma2_hat.write(sel.sigma2_hat);
        }
        Ok(())
    })
}

/// Number of table rows; 0 for null.
///
/// # Safety
/// `sel` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn sl_selection_len(sel: *const SlSelection) -> usize {
    sel.as_ref().map_or(0, |s| s.0.table.len())
}

/// # Safety
/// `sel` must be live and `row` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_selection_row(sel: *const SlSelection, index: usize, row: *mut SlCpRow) -> SlStatus {
    guard(|| {
        let sel = &sel.as_ref().ok_or_else(|| null("sel"))?.0;
        let r = sel
            .table
            .get(index)
            .ok_or_else(|| Fail(SlStatus::IndexOutOfRange, format!("row {index} of {}", sel.table.len())))?;
        write_out(row, SlCpRow { lambda: r.lambda, rss: r.rss, df: r.df, cp_star: r.cp_star }, "row")
    })
}

/// # Safety
/// `sel` must come from `sl_ridge_select` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sl_selection_free(sel: *mut SlSelection) {
    if !sel.is_null() {
        drop(Box::from_raw(sel));
    }
}

/// Result of a preset risk comparison.
pub struct SlRisk(RiskOutcome);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SlRiskRow {
    pub theta_norm: f64,
    pub mean: f64,
    pub std_error: f64,
    /// NaN when the row has no baseline.
    pub baseline_mean: f64,
    pub paired_diff_mean: f64,
    pub paired_diff_se: f64,
}

/// Runs the risk comparison of preset `name`. `n == 0` keeps the preset's
/// replication count, `threads == 0` uses all cores.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sl_risk_preset(name: *const c_char, n: u64, seed: u64, threads: usize, out: *mut *mut SlRisk) -> SlStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let name = CStr::from_ptr(name).to_str().map_err(|_| Fail(SlStatus::InvalidArgument, "name is not UTF-8".into()))?;
        let mut cfg = presets::preset(name)
            .and_then(|p| p.risk)
            .ok_or_else(|| Fail(SlStatus::InvalidArgument, format!("no risk preset `{name}`")))?;
        cfg.apply(&RiskOverrides { n: (n > 0).then_some(n), seed: Some(seed), ..RiskOverrides::default() });
        let outcome = cfg.run((threads > 0).then_some(threads))?;
        out.write(Box::into_raw(Box::new(SlRisk(outcome))));
        Ok(())
    })
}

/// # Safety
/// `risk` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn sl_risk_len(risk: *const SlRisk) -> usize {
    risk.as_ref().map_or(0, |r| r.0.rows.len())
}

/// Whether every assertion of the preset held.
///
/// # Safety
/// `risk` must be live and `pass` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_risk_pass(risk: *const SlRisk, pass: *mut bool) -> SlStatus {
    guard(|| {
        let r = &risk.as_ref().ok_or_else(|| null("risk"))?.0;
        write_out(pass, r.pass(), "pass")
    })
}

/// # Safety
/// `risk` must be live and `row` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_risk_row(risk: *const SlRisk, index: usize, row: *mut SlRiskRow) -> SlStatus {
    guard(|| {
        let r = &risk.as_ref().ok_or_else(|| null("risk"))?.0;
        let (_, rep) = r
            .rows
            .get(index)
            .ok_or_else(|| Fail(SlStatus::IndexOutOfRange, format!("row {index} of {}", r.rows.len())))?;
        let row_value = SlRiskRow {
            theta_norm: rep.theta_norm,
            mean: rep.mean,
            std_error: rep.std_error,
            baseline_mean: rep.baseline_mean.unwrap_or(f64::NAN),
            paired_diff_mean: rep.paired_diff_mean.unwrap_or(f64::NAN),
            paired_diff_se: rep.paired_diff_se.unwrap_or(f64::NAN),
        };
        write_out(row, row_value, "row")
    })
}

/// # Safety
/// `risk` must come from `sl_risk_preset` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sl_risk_free(risk: *mut SlRisk) {
    if !risk.is_null() {
        drop(Box::from_raw(risk));
    }
}
