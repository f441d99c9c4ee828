//! C ABI for the running-maximum toolkit. Opaque handles, integer status
//! codes, and a thread-local last-error message; no Rust types cross the
//! boundary.
//!
//! Status codes: 0 ok, 1 null/invalid argument, 2 configuration error,
//! 3 numeric failure.

use std::cell::RefCell;
use std::ffi::{CStr, CString, c_char};
use std::ptr;

use runmax::clark_ocone::estimate_ef;
use runmax::first_passage::{
    Dynamics, alpha_constants_cox, alpha_constants_hawkes, mc_first_passage,
};
use runmax::laplace::{Method, NamedTransform};
use runmax::model::{CoxParams, HawkesParams, JumpFn, JumpSpec, SimGrid, validate_cox, validate_hawkes};
use runmax::pricing::{Payoff, price_lookback};
use runmax::rng::StreamFamily;

pub const RM_OK: i32 = 0;
pub const RM_ERR_ARG: i32 = 1;
pub const RM_ERR_CONFIG: i32 = 2;
pub const RM_ERR_NUMERIC: i32 = 3;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn code_of(e: &runmax::Error) -> i32 {
    match e {
        runmax::Error::Config(_) | runmax::Error::Io(_) => RM_ERR_CONFIG,
        _ => RM_ERR_NUMERIC,
    }
}

enum Params {
    Cox(CoxParams),
    Hawkes(HawkesParams),
}

/// Opaque model handle: parameters plus jump specification.
pub struct RmModel {
    params: Params,
    spec: JumpSpec,
}

impl RmModel {
    fn dynamics(&self) -> Dynamics<'_> {
        match &self.params {
            Params::Cox(p) => Dynamics::Cox(p),
            Params::Hawkes(p) => Dynamics::Hawkes(p),
        }
    }
}

/// Last error message for this thread, or NULL. Valid until the next
/// failing call on the same thread.
#[unsafe(no_mangle)]
pub extern "C" fn rm_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr())
    })
}

/// # Safety
/// `out` must be a valid pointer to an `RmModel*` slot.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn rm_model_new_cox(
    mu: f64,
    sigma1: f64,
    kappa: f64,
    theta: f64,
    sigma2: f64,
    lambda0: f64,
    s0: f64,
    horizon: f64,
    out: *mut *mut RmModel,
) -> i32 {
    if out.is_null() {
        return RM_ERR_ARG;
    }
    let p = CoxParams { mu, sigma1, kappa, theta, sigma2, lambda0, s0, horizon };
    let report = validate_cox(&p);
    if !report.is_valid() {
        set_error(report.errors.join("; "));
        return RM_ERR_CONFIG;
    }
    let model = Box::new(RmModel { params: Params::Cox(p), spec: JumpSpec::none() });
    unsafe { *out = Box::into_raw(model) };
    RM_OK
}

/// # Safety
/// `out` must be a valid pointer to an `RmModel*` slot.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn rm_model_new_hawkes(
    mu: f64,
    sigma1: f64,
    kappa: f64,
    theta: f64,
    eta: f64,
    lambda0: f64,
    s0: f64,
    horizon: f64,
    out: *mut *mut RmModel,
) -> i32 {
    if out.is_null() {
        return RM_ERR_ARG;
    }
    let p = HawkesParams { mu, sigma1, kappa, theta, eta, lambda0, s0, horizon };
    let report = validate_hawkes(&p);
    if !report.is_valid() {
        set_error(report.errors.join("; "));
        return RM_ERR_CONFIG;
    }
    let model = Box::new(RmModel { params: Params::Hawkes(p), spec: JumpSpec::none() });
    unsafe { *out = Box::into_raw(model) };
    RM_OK
}

/// Attach a discrete jump measure with a constant jump size `j_const`.
///
/// # Safety
/// `model` must come from `rm_model_new_*`; `atoms_z` and `atoms_w` must
/// point to `n_atoms` doubles each.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn rm_model_set_jumps(
    model: *mut RmModel,
    atoms_z: *const f64,
    atoms_w: *const f64,
    n_atoms: usize,
    j_const: f64,
) -> i32 {
    if model.is_null() || (n_atoms > 0 && (atoms_z.is_null() || atoms_w.is_null())) {
        return RM_ERR_ARG;
    }
    let (zs, ws) = unsafe {
        (
            std::slice::from_raw_parts(atoms_z, n_atoms),
            std::slice::from_raw_parts(atoms_w, n_atoms),
        )
    };
    let spec = JumpSpec {
        atoms: zs.iter().copied().zip(ws.iter().copied()).collect(),
        jump_fn: JumpFn::Const(j_const),
    };
    if let Err(e) = spec.validate() {
        set_error(e.to_string());
        return RM_ERR_CONFIG;
    }
    unsafe { (*model).spec = spec };
    RM_OK
}

/// # Safety
/// `model` must come from `rm_model_new_*` and not be freed twice.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn rm_model_free(model: *mut RmModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Mean and standard error of the running maximum M_T over `n_paths`.
///
/// # Safety
/// `model`, `out_mean`, `out_se` must be valid pointers.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn rm_estimate_max(
    model: *const RmModel,
    seed: u64,
    n_steps: u32,
    n_paths: u32,
    out_mean: *mut f64,
    out_se: *mut f64,
) -> i32 {
    if model.is_null() || out_mean.is_null() || out_se.is_null() || n_paths < 2 {
        return RM_ERR_ARG;
    }
    let m = unsafe { &*model };
    let horizon = match &m.params {
        Params::Cox(p) => p.horizon,
        Params::Hawkes(p) => p.horizon,
    };
    let grid = match SimGrid::new(n_steps as usize, horizon) {
        Ok(g) => g,
        Err(e) => {
            set_error(e.to_string());
            return RM_ERR_CONFIG;
        }
    };
    let (mean, se) =
        estimate_ef(m.dynamics(), &m.spec, &grid, n_paths as usize, seed, true);
    unsafe {
        *out_mean = mean;
        *out_se = se;
    }
    RM_OK
}

/// Lookback price; `fixed_strike != 0` selects `(e^{M_T} - strike)^+`,
/// otherwise the floating-strike payoff. `discount` of NaN means "use mu".
///
/// # Safety
/// `model`, `out_price`, `out_se` must be valid pointers.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn rm_price_lookback(
    model: *const RmModel,
    seed: u64,
    n_steps: u32,
    n_paths: u32,
    fixed_strike: i32,
    strike: f64,
    discount: f64,
    out_price: *mut f64,
    out_se: *mut f64,
) -> i32 {
    if model.is_null() || out_price.is_null() || out_se.is_null() || n_paths < 2 {
        return RM_ERR_ARG;
    }
    let m = unsafe { &*model };
    let horizon = match &m.params {
        Params::Cox(p) => p.horizon,
        Params::Hawkes(p) => p.horizon,
    };
    let grid = match SimGrid::new(n_steps as usize, horizon) {
        Ok(g) => g,
        Err(e) => {
            set_error(e.to_string());
            return RM_ERR_CONFIG;
        }
    };
    let payoff = if fixed_strike != 0 {
        Payoff::FixedStrike { strike }
    } else {
        Payoff::FloatingStrike
    };
    let disc = if discount.is_nan() { None } else { Some(discount) };
    let res = price_lookback(
        m.dynamics(),
        &m.spec,
        &grid,
        payoff,
        disc,
        n_paths as usize,
        seed,
    );
    unsafe {
        *out_price = res.price;
        *out_se = res.se;
    }
    RM_OK
}

/// Exponential-tilt constants for the model's closed-form tails.
///
/// # Safety
/// Output pointers must be valid.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn rm_constants(
    model: *const RmModel,
    out_alpha1: *mut f64,
    out_alpha2: *mut f64,
    out_alpha: *mut f64,
) -> i32 {
    if model.is_null() || out_alpha1.is_null() || out_alpha2.is_null() || out_alpha.is_null()
    {
        return RM_ERR_ARG;
    }
    let m = unsafe { &*model };
    let res = match &m.params {
        Params::Cox(p) => alpha_constants_cox(p, &m.spec, None),
        Params::Hawkes(p) => alpha_constants_hawkes(p, &m.spec),
    };
    match res {
        Ok(c) => {
            unsafe {
                *out_alpha1 = c.alpha1;
                *out_alpha2 = c.alpha2;
                *out_alpha = c.alpha;
            }
            RM_OK
        }
        Err(e) => {
            set_error(e.to_string());
            code_of(&e)
        }
    }
}

/// P(sup X >= b and sup lambda >= e on [0, T]) by Monte Carlo.
///
/// # Safety
/// `model`, `out_prob`, `out_se` must be valid pointers.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn rm_first_passage(
    model: *const RmModel,
    b: f64,
    e: f64,
    seed: u64,
    n_steps: u32,
    n_paths: u32,
    out_prob: *mut f64,
    out_se: *mut f64,
) -> i32 {
    if model.is_null() || out_prob.is_null() || out_se.is_null() || n_paths < 1 {
        return RM_ERR_ARG;
    }
    let m = unsafe { &*model };
    let horizon = match &m.params {
        Params::Cox(p) => p.horizon,
        Params::Hawkes(p) => p.horizon,
    };
    let grid = match SimGrid::new(n_steps as usize, horizon) {
        Ok(g) => g,
        Err(err) => {
            set_error(err.to_string());
            return RM_ERR_CONFIG;
        }
    };
    let est = mc_first_passage(m.dynamics(), &m.spec, b, e, &grid, n_paths as usize, seed);
    unsafe {
        *out_prob = est.prob;
        *out_se = est.se;
    }
    RM_OK
}

/// Invert a named transform: "one_over_s", "one_over_s_plus_1",
/// "one_over_s2". `method`: 0 Gaver-Stehfest, 1 Talbot; `order` 0 for the
/// engine default.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` a valid pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn rm_invert_laplace(
    name: *const c_char,
    t: f64,
    method: i32,
    order: u32,
    out: *mut f64,
) -> i32 {
    if name.is_null() || out.is_null() {
        return RM_ERR_ARG;
    }
    let name = match unsafe { CStr::from_ptr(name) }.to_str() {
        Ok(s) => s,
        Err(_) => return RM_ERR_ARG,
    };
    let tf = match NamedTransform::parse(name) {
        Some(t) => t,
        None => {
            set_error(format!("unknown transform '{name}'"));
            return RM_ERR_CONFIG;
        }
    };
    let m = match method {
        0 => Method::GaverStehfest,
        1 => Method::Talbot,
        _ => return RM_ERR_ARG,
    };
    match tf.invert(t, m, order as usize) {
        Ok(v) => {
            unsafe { *out = v };
            RM_OK
        }
        Err(e) => {
            set_error(e.to_string());
            RM_ERR_NUMERIC
        }
    }
}

/// One simulated path's node maximum and continuous (bridge-refined)
/// maximum; mostly a determinism probe for bindings.
///
/// # Safety
/// Pointers must be valid.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn rm_simulate_one(
    model: *const RmModel,
    seed: u64,
    path_id: u64,
    n_steps: u32,
    out_max_nodes: *mut f64,
    out_max_cont: *mut f64,
) -> i32 {
    if model.is_null() || out_max_nodes.is_null() || out_max_cont.is_null() {
        return RM_ERR_ARG;
    }
    let m = unsafe { &*model };
    let horizon = match &m.params {
        Params::Cox(p) => p.horizon,
        Params::Hawkes(p) => p.horizon,
    };
    let grid = match SimGrid::new(n_steps as usize, horizon) {
        Ok(g) => g,
        Err(e) => {
            set_error(e.to_string());
            return RM_ERR_CONFIG;
        }
    };
    let fam = StreamFamily::new(seed, path_id);
    let path = m.dynamics().simulate(&m.spec, &grid, &fam);
    unsafe {
        *out_max_nodes = path.max_over_nodes();
        *out_max_cont = path.m_cont;
    }
    RM_OK
}
