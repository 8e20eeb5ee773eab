//! C ABI over `harnack_lab`.
//!
//! Objects are opaque handles created by `hl_*_new`/`hl_*_parse` style calls
//! and released with the matching `hl_*_free`. Every fallible call returns an
//! [`HlStatus`]; on failure `hl_last_error()` describes the problem. Strings
//! returned to the caller are released with `hl_string_free`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::{c_char, size_t};

use harnack_lab::feynman_kac::evaluate;
use harnack_lab::harnack::{sup_inf_ratio, SubGrid, Subcylinder};
use harnack_lab::operator::check_hypothesis;
use harnack_lab::sde::{simulate_batch, ExitRule};
use harnack_lab::solutions::counterexample_family;
use harnack_lab::{CylinderDomain, Error, Expr, ExprError, OperatorSpec, PathBatch, SimConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    EvaluationError = 4,
    NonPositive = 5,
    OutsideSupport = 6,
    EmptyRegion = 7,
    Internal = 8,
}

pub struct HlExpr(Expr);
pub struct HlOperator(OperatorSpec);
pub struct HlPathBatch(PathBatch);

/// Cylinder `(x_lo, x_hi) × B_radius`, subcylinder `[sub_x_lo, sub_x_hi] × B_inner_radius`,
/// and the stopping ball `B_stop_radius`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HlDomain {
    pub x_lo: f64,
    pub x_hi: f64,
    pub sub_x_lo: f64,
    pub sub_x_hi: f64,
    pub radius: f64,
    pub stop_radius: f64,
    pub inner_radius: f64,
}

impl From<HlDomain> for CylinderDomain {
    fn from(d: HlDomain) -> Self {
        CylinderDomain {
            x_lo: d.x_lo,
            x_hi: d.x_hi,
            sub_x_lo: d.sub_x_lo,
            sub_x_hi: d.sub_x_hi,
            radius: d.radius,
            stop_radius: d.stop_radius,
            inner_radius: d.inner_radius,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HlSimConfig {
    pub dt: f64,
    pub t_max: f64,
    pub n_paths: size_t,
    pub master_seed: u64,
    /// Nonzero: Brownian-bridge exit detection between grid times.
    pub bridge: bool,
}

impl From<HlSimConfig> for SimConfig {
    fn from(c: HlSimConfig) -> Self {
        SimConfig {
            dt: c.dt,
            t_max: c.t_max,
            n_paths: c.n_paths,
            master_seed: c.master_seed,
            exit_rule: if c.bridge { ExitRule::Bridge } else { ExitRule::GridOnly },
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HlCheckResult {
    pub pass: bool,
    pub sign_change_ok: bool,
    pub min_derivative_mass: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    /// -1 when no order up to the search limit passes.
    pub smallest_passing_r: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> HlStatus {
    match e {
        Error::Expr(ExprError::Domain(_)) | Error::EvalAt { .. } => HlStatus::EvaluationError,
        Error::Expr(_) => HlStatus::ParseError,
        Error::Invalid(_) => HlStatus::InvalidArgument,
        Error::NonPositive { .. } => HlStatus::NonPositive,
        Error::OutsideSupport(_) => HlStatus::OutsideSupport,
        Error::EmptyRegion(_) => HlStatus::EmptyRegion,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => HlStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into a status and the last-error message.
fn guard(f: impl FnOnce() -> Result<(), HlFail>) -> HlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HlStatus::Ok,
        Ok(Err(HlFail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HlStatus::Internal
        }
    }
}

struct HlFail(HlStatus, String);

impl From<Error> for HlFail {
    fn from(e: Error) -> Self {
        HlFail(status_of(&e), e.to_string())
    }
}

impl From<ExprError> for HlFail {
    fn from(e: ExprError) -> Self {
        HlFail::from(Error::from(e))
    }
}

fn null() -> HlFail {
    HlFail(HlStatus::NullPointer, "null pointer argument".into())
}

fn bad(msg: impl Into<String>) -> HlFail {
    HlFail(HlStatus::InvalidArgument, msg.into())
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, HlFail> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|_| bad("string is not valid UTF-8"))
}

unsafe fn slice<'a>(p: *const f64, n: size_t) -> Result<&'a [f64], HlFail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn domain(p: *const HlDomain) -> CylinderDomain {
    if p.is_null() {
        CylinderDomain::default()
    } else {
        (*p).into()
    }
}

/// Message of the last failed call on this thread. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn hl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// The default cylinder `(-5, 6) × B_3` with subcylinder `[0, 1] × B_1` and stopping ball `B_2`.
#[no_mangle]
pub extern "C" fn hl_domain_default() -> HlDomain {
    let d = CylinderDomain::default();
    HlDomain {
        x_lo: d.x_lo,
        x_hi: d.x_hi,
        sub_x_lo: d.sub_x_lo,
        sub_x_hi: d.sub_x_hi,
        radius: d.radius,
        stop_radius: d.stop_radius,
        inner_radius: d.inner_radius,
    }
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses `text` over the `n_vars` variable names in `vars`.
///
/// # Safety
/// `text` and each `vars[i]` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_expr_parse(
    text: *const c_char,
    vars: *const *const c_char,
    n_vars: size_t,
    out: *mut *mut HlExpr,
) -> HlStatus {
    guard(|| {
        if out.is_null() || (n_vars > 0 && vars.is_null()) {
            return Err(null());
        }
        let src = self::text(text)?;
        let names = (0..n_vars)
            .map(|i| self::text(*vars.add(i)))
            .collect::<Result<Vec<_>, _>>()?;
        let e = Expr::parse(src, &names)?;
        *out = Box::into_raw(Box::new(HlExpr(e)));
        Ok(())
    })
}

/// # Safety
/// `e` must be a live handle; `values` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hl_expr_eval(e: *const HlExpr, values: *const f64, n: size_t, out: *mut f64) -> HlStatus {
    guard(|| {
        if e.is_null() || out.is_null() {
            return Err(null());
        }
        *out = (*e).0.eval(slice(values, n)?)?;
        Ok(())
    })
}

/// # Safety
/// `e` must be a live handle, `var` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hl_expr_differentiate(e: *const HlExpr, var: *const c_char, out: *mut *mut HlExpr) -> HlStatus {
    guard(|| {
        if e.is_null() || out.is_null() {
            return Err(null());
        }
        let d = (*e).0.differentiate(text(var)?)?;
        *out = Box::into_raw(Box::new(HlExpr(d)));
        Ok(())
    })
}

/// Fully parenthesised text of `e`; free with `hl_string_free`. NULL if `e` is NULL.
///
/// # Safety
/// `e` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn hl_expr_to_string(e: *const HlExpr) -> *mut c_char {
    if e.is_null() {
        set_error("null pointer argument");
        return ptr::null_mut();
    }
    CString::new((*e).0.to_string()).map_or(ptr::null_mut(), CString::into_raw)
}

/// # Safety
/// `e` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hl_expr_free(e: *mut HlExpr) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// `β` over `y1..y{N-1}`, `γ` over `x, y1..`. `dom` may be NULL for the default domain.
///
/// # Safety
/// Strings NUL-terminated, `dom` NULL or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hl_operator_new(
    beta: *const c_char,
    gamma: *const c_char,
    dim_n: size_t,
    dom: *const HlDomain,
    out: *mut *mut HlOperator,
) -> HlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let op = OperatorSpec::new(text(beta)?, text(gamma)?, dim_n, &domain(dom))?;
        *out = Box::into_raw(Box::new(HlOperator(op)));
        Ok(())
    })
}

/// # Safety
/// `op` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hl_operator_free(op: *mut HlOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// # Safety
/// `op` live, `dom` NULL or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hl_check_hypothesis(
    op: *const HlOperator,
    dom: *const HlDomain,
    r: u32,
    grid_step: f64,
    out: *mut HlCheckResult,
) -> HlStatus {
    guard(|| {
        if op.is_null() || out.is_null() {
            return Err(null());
        }
        let rep = check_hypothesis(&(*op).0, &domain(dom), r, grid_step)?;
        *out = HlCheckResult {
            pass: rep.pass,
            sign_change_ok: rep.sign_change_ok,
            min_derivative_mass: rep.min_derivative_mass,
            beta_min: rep.beta_min,
            beta_max: rep.beta_max,
            smallest_passing_r: rep.smallest_passing_r.map_or(-1, |v| v as i32),
        };
        Ok(())
    })
}

/// # Safety
/// `op` live, `dom` NULL or valid, `start_y` holds `n_y` doubles, `cfg` valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hl_simulate(
    op: *const HlOperator,
    dom: *const HlDomain,
    start_x: f64,
    start_y: *const f64,
    n_y: size_t,
    cfg: *const HlSimConfig,
    out: *mut *mut HlPathBatch,
) -> HlStatus {
    guard(|| {
        if op.is_null() || cfg.is_null() || out.is_null() {
            return Err(null());
        }
        let b = simulate_batch(&(*op).0, &domain(dom), start_x, slice(start_y, n_y)?, &(*cfg).into())?;
        *out = Box::into_raw(Box::new(HlPathBatch(b)));
        Ok(())
    })
}

/// # Safety
/// `b` live or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn hl_batch_len(b: *const HlPathBatch) -> size_t {
    if b.is_null() {
        0
    } else {
        (*b).0.len()
    }
}

/// # Safety
/// `b` live or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn hl_batch_dim_y(b: *const HlPathBatch) -> size_t {
    if b.is_null() {
        0
    } else {
        (*b).0.dim_y()
    }
}

/// Stopped state of path `i`. `y` receives `dim_y` doubles; any output pointer may be NULL.
///
/// # Safety
/// `b` live; non-NULL outputs writable, `y` with room for `dim_y` doubles.
#[no_mangle]
pub unsafe extern "C" fn hl_batch_path(
    b: *const HlPathBatch,
    i: size_t,
    x: *mut f64,
    y: *mut f64,
    stop_time: *mut f64,
    gamma_integral: *mut f64,
    exited: *mut bool,
) -> HlStatus {
    guard(|| {
        if b.is_null() {
            return Err(null());
        }
        let b = &(*b).0;
        if i >= b.len() {
            return Err(bad(format!("path index {i} out of range for {} paths", b.len())));
        }
        if !x.is_null() {
            *x = b.stopped_x(i);
        }
        if !y.is_null() {
            ptr::copy_nonoverlapping(b.stopped_y(i).as_ptr(), y, b.dim_y());
        }
        if !stop_time.is_null() {
            *stop_time = b.stop_time(i);
        }
        if !gamma_integral.is_null() {
            *gamma_integral = b.gamma_integral(i);
        }
        if !exited.is_null() {
            *exited = b.exited(i);
        }
        Ok(())
    })
}

/// # Safety
/// `b` live; `mean`, `std_error` writable.
#[no_mangle]
pub unsafe extern "C" fn hl_batch_mean_stop_time(b: *const HlPathBatch, mean: *mut f64, std_error: *mut f64) -> HlStatus {
    guard(|| {
        if b.is_null() || mean.is_null() || std_error.is_null() {
            return Err(null());
        }
        let s = (*b).0.stop_time_stats();
        *mean = s.mean;
        *std_error = s.std_error;
        Ok(())
    })
}

/// # Safety
/// `b` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hl_batch_free(b: *mut HlPathBatch) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// Feynman–Kac estimate of `u_data` (an expression over `x, y1..`) from the start point at horizon `t`.
///
/// # Safety
/// Handles live, `dom` NULL or valid, `start_y` holds `n_y` doubles, outputs writable.
#[no_mangle]
pub unsafe extern "C" fn hl_fk_evaluate(
    op: *const HlOperator,
    dom: *const HlDomain,
    u_data: *const HlExpr,
    start_x: f64,
    start_y: *const f64,
    n_y: size_t,
    t: f64,
    cfg: *const HlSimConfig,
    value: *mut f64,
    std_error: *mut f64,
) -> HlStatus {
    guard(|| {
        if op.is_null() || u_data.is_null() || cfg.is_null() || value.is_null() || std_error.is_null() {
            return Err(null());
        }
        let op = &(*op).0;
        let u = &(*u_data).0;
        if u.variables().len() != op.dim_n() {
            return Err(bad("u_data must be declared over x, y1..y{N-1}"));
        }
        let est = evaluate(op, &domain(dom), u, start_x, slice(start_y, n_y)?, t, &(*cfg).into())?;
        *value = est.value;
        *std_error = est.std_error;
        Ok(())
    })
}

/// Grid sup/inf ratio of `e^{-λx} cosh(√λ y)` over `[0, 1] × [-1, 1]` with `nx × ny` nodes.
///
/// # Safety
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hl_counterexample_ratio(lambda: f64, nx: size_t, ny: size_t, out: *mut f64) -> HlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let s = counterexample_family(lambda)?;
        let sub = Subcylinder::of(&CylinderDomain::default());
        *out = sup_inf_ratio(s.name(), &s, 1, &sub, SubGrid { nx, ny })?.ratio;
        Ok(())
    })
}
