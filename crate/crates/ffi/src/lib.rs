//! C ABI over the `win_martingale` crate.
//!
//! Every fallible function returns a [`WmStatus`]; on failure the message is
//! kept per thread and retrieved with [`wm_last_error_message`]. Handles are
//! opaque, created by `wm_*` constructors and released with the matching
//! `*_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use win_martingale::diffusion::{make_grid, GridMode, PathEnsemble};
use win_martingale::discrete_mot::{default_states, solve_entropic_mot, DiscreteMartingaleProblem, MartingaleCoupling};
use win_martingale::entropy::{model_entropy, SigmaSource};
use win_martingale::martingales::{aldous_sigma, WinModel};
use win_martingale::value::{optimal_value, v_bar, v_tilde};
use win_martingale::Error;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WmStatus {
    Ok = 0,
    NullPointer = 1,
    Parameter = 2,
    Domain = 3,
    Evaluation = 4,
    Numerical = 5,
    InsufficientData = 6,
    Infeasible = 7,
    UnknownSpec = 8,
    Io = 9,
    OutOfRange = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WmGridMode {
    Uniform = 0,
    Geometric = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WmSigmaSource {
    Analytic = 0,
    Realized = 1,
}

/// Monte-Carlo specific relative entropy with its truncation bracket.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WmEntropyEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
}

/// Simulated path ensemble.
pub struct WmEnsemble {
    inner: PathEnsemble,
}

/// Solved discrete martingale coupling.
pub struct WmCoupling {
    inner: MartingaleCoupling,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

enum Fail {
    Core(Error),
    Null(&'static str),
    Range(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> WmStatus {
    match e {
        Error::Parameter(_) => WmStatus::Parameter,
        Error::Domain(_) => WmStatus::Domain,
        Error::Evaluation(_) => WmStatus::Evaluation,
        Error::Numerical(_) => WmStatus::Numerical,
        Error::InsufficientData(_) => WmStatus::InsufficientData,
        Error::Infeasible(_) => WmStatus::Infeasible,
        Error::UnknownSpec(_) => WmStatus::UnknownSpec,
        Error::Io(_) => WmStatus::Io,
    }
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> WmStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (WmStatus::Ok, String::new()),
        Ok(Err(Fail::Core(e))) => (status_of(&e), e.to_string()),
        Ok(Err(Fail::Null(what))) => (WmStatus::NullPointer, format!("null pointer: {what}")),
        Ok(Err(Fail::Range(m))) => (WmStatus::OutOfRange, m),
        Err(p) => {
            let m = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            (WmStatus::Panic, format!("panic: {m}"))
        }
    };
    set_error(msg);
    status
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Core(Error::Parameter(format!("{what} is not valid UTF-8"))))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, need: usize, what: &'static str) -> Result<&'a mut [T], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    if len < need {
        return Err(Fail::Range(format!("{what} holds {len} elements, {need} required")));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

fn grid_mode(m: WmGridMode) -> GridMode {
    match m {
        WmGridMode::Uniform => GridMode::Uniform,
        WmGridMode::Geometric => GridMode::Geometric,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message length
/// excluding the terminator; empty after a successful call.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn wm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Optimal specific relative entropy of a win-martingale started at `x0`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wm_optimal_value(x0: f64, out: *mut f64) -> WmStatus {
    guard(|| {
        let v = optimal_value(x0)?;
        *out.as_mut().ok_or(Fail::Null("out"))? = v;
        Ok(())
    })
}

/// Optimal cost-to-go `v_bar(s, x)`; `+inf` at `x` in `{0, 1}` for `s < 1`, NaN outside `[0,1]^2`.
#[no_mangle]
pub extern "C" fn wm_v_bar(s: f64, x: f64) -> f64 {
    v_bar(s, x)
}

/// Lower bound `v_tilde(s, x)`.
#[no_mangle]
pub extern "C" fn wm_v_tilde(s: f64, x: f64) -> f64 {
    v_tilde(s, x)
}

/// Volatility `sin(pi x) / (pi sqrt(1 - t))` of the optimal martingale.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wm_aldous_sigma(t: f64, x: f64, out: *mut f64) -> WmStatus {
    guard(|| {
        let v = aldous_sigma(t, x)?;
        *out.as_mut().ok_or(Fail::Null("out"))? = v;
        Ok(())
    })
}

/// Simulates `n_paths` paths of the model `spec_id` (`aldous`, `bass`,
/// `aldous-tc:<name>`) on `[0, 1 - epsilon_final]` and stores a new handle in `*out`.
///
/// # Safety
/// `spec_id` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wm_simulate(
    spec_id: *const c_char,
    x0: f64,
    n_paths: usize,
    n_steps: usize,
    epsilon_final: f64,
    mode: WmGridMode,
    seed: u64,
    out: *mut *mut WmEnsemble,
) -> WmStatus {
    guard(|| {
        let out = out.as_mut().ok_or(Fail::Null("out"))?;
        let model = WinModel::parse(str_arg(spec_id, "spec_id")?)?;
        let grid = make_grid(0.0, n_steps, grid_mode(mode), epsilon_final)?;
        let inner = model.simulate(&grid, x0, n_paths, seed)?;
        *out = Box::into_raw(Box::new(WmEnsemble { inner }));
        Ok(())
    })
}

/// Number of paths; 0 for a null handle.
///
/// # Safety
/// `e` must be null or a live handle from [`wm_simulate`].
#[no_mangle]
pub unsafe extern "C" fn wm_ensemble_n_paths(e: *const WmEnsemble) -> usize {
    e.as_ref().map_or(0, |e| e.inner.n_paths())
}

/// Number of time nodes per path; 0 for a null handle.
///
/// # Safety
/// `e` must be null or a live handle from [`wm_simulate`].
#[no_mangle]
pub unsafe extern "C" fn wm_ensemble_n_nodes(e: *const WmEnsemble) -> usize {
    e.as_ref().map_or(0, |e| e.inner.n_nodes())
}

/// Copies the time nodes into `out[0..n_nodes]`.
///
/// # Safety
/// `e` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn wm_ensemble_times(e: *const WmEnsemble, out: *mut f64, len: usize) -> WmStatus {
    guard(|| {
        let e = e.as_ref().ok_or(Fail::Null("ensemble"))?;
        let nodes = e.inner.grid.nodes();
        out_slice(out, len, nodes.len(), "out")?.copy_from_slice(nodes);
        Ok(())
    })
}

/// Copies path `path` into `out[0..n_nodes]`.
///
/// # Safety
/// `e` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn wm_ensemble_path(e: *const WmEnsemble, path: usize, out: *mut f64, len: usize) -> WmStatus {
    guard(|| {
        let e = e.as_ref().ok_or(Fail::Null("ensemble"))?;
        if path >= e.inner.n_paths() {
            return Err(Fail::Range(format!("path {path} out of range ({} paths)", e.inner.n_paths())));
        }
        let values = e.inner.path(path);
        out_slice(out, len, values.len(), "out")?.copy_from_slice(values);
        Ok(())
    })
}

/// Copies the terminal outcomes (0 or 1) into `out[0..n_paths]`.
///
/// # Safety
/// `e` must be a live handle; `out` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn wm_ensemble_terminal(e: *const WmEnsemble, out: *mut u8, len: usize) -> WmStatus {
    guard(|| {
        let e = e.as_ref().ok_or(Fail::Null("ensemble"))?;
        let t = e.inner.terminal();
        out_slice(out, len, t.len(), "out")?.copy_from_slice(t);
        Ok(())
    })
}

/// Releases an ensemble; null is ignored.
///
/// # Safety
/// `e` must be null or a handle from [`wm_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wm_ensemble_free(e: *mut WmEnsemble) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Streaming Monte-Carlo estimate of the specific relative entropy.
///
/// # Safety
/// `spec_id` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wm_entropy_estimate(
    spec_id: *const c_char,
    x0: f64,
    n_paths: usize,
    n_steps: usize,
    epsilon_final: f64,
    mode: WmGridMode,
    seed: u64,
    source: WmSigmaSource,
    out: *mut WmEntropyEstimate,
) -> WmStatus {
    guard(|| {
        let out = out.as_mut().ok_or(Fail::Null("out"))?;
        let model = WinModel::parse(str_arg(spec_id, "spec_id")?)?;
        let grid = make_grid(0.0, n_steps, grid_mode(mode), epsilon_final)?;
        let source = match source {
            WmSigmaSource::Analytic => SigmaSource::Analytic,
            WmSigmaSource::Realized => SigmaSource::Realized,
        };
        let e = model_entropy(&model, &grid, x0, n_paths, seed, source)?;
        *out = WmEntropyEstimate {
            mean: e.mean,
            std_error: e.std_error,
            n_paths: e.n_paths,
            bracket_lo: e.truncation_bracket.0,
            bracket_hi: e.truncation_bracket.1,
        };
        Ok(())
    })
}

fn store_coupling(out: &mut *mut WmCoupling, inner: MartingaleCoupling) {
    *out = Box::into_raw(Box::new(WmCoupling { inner }));
}

/// Solves a discrete problem given as JSON `{states, T, mu, nu, ref_var[, f0]}`.
///
/// # Safety
/// `problem_json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wm_discrete_solve_json(
    problem_json: *const c_char,
    max_iters: usize,
    tol: f64,
    out: *mut *mut WmCoupling,
) -> WmStatus {
    guard(|| {
        let out = out.as_mut().ok_or(Fail::Null("out"))?;
        let problem = DiscreteMartingaleProblem::from_json_str(str_arg(problem_json, "problem_json")?)?;
        store_coupling(out, solve_entropic_mot(&problem, max_iters, tol)?);
        Ok(())
    })
}

/// Solves the mollified win problem on the default 201-state grid over `[-0.5, 1.5]`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wm_discrete_solve_win(
    n_steps: usize,
    x0: f64,
    width: f64,
    max_iters: usize,
    tol: f64,
    out: *mut *mut WmCoupling,
) -> WmStatus {
    guard(|| {
        let out = out.as_mut().ok_or(Fail::Null("out"))?;
        let problem = DiscreteMartingaleProblem::win(default_states(), n_steps, x0, width)?;
        store_coupling(out, solve_entropic_mot(&problem, max_iters, tol)?);
        Ok(())
    })
}

/// Number of grid states; 0 for a null handle.
///
/// # Safety
/// `c` must be null or a live coupling handle.
#[no_mangle]
pub unsafe extern "C" fn wm_coupling_n_states(c: *const WmCoupling) -> usize {
    c.as_ref().map_or(0, |c| c.inner.states.len())
}

/// Number of transition steps; 0 for a null handle.
///
/// # Safety
/// `c` must be null or a live coupling handle.
#[no_mangle]
pub unsafe extern "C" fn wm_coupling_n_steps(c: *const WmCoupling) -> usize {
    c.as_ref().map_or(0, |c| c.inner.n_steps)
}

/// Relative entropy against the reference walk: total and per step.
///
/// # Safety
/// `c` must be a live coupling handle; outputs must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wm_coupling_kl(c: *const WmCoupling, total: *mut f64, per_step: *mut f64) -> WmStatus {
    guard(|| {
        let c = c.as_ref().ok_or(Fail::Null("coupling"))?;
        *total.as_mut().ok_or(Fail::Null("total"))? = c.inner.kl;
        *per_step.as_mut().ok_or(Fail::Null("per_step"))? = c.inner.normalized_kl();
        Ok(())
    })
}

/// Terminal total-variation error and largest conditional-mean error.
///
/// # Safety
/// `c` must be a live coupling handle; outputs must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wm_coupling_residuals(
    c: *const WmCoupling,
    terminal_tv: *mut f64,
    martingale: *mut f64,
) -> WmStatus {
    guard(|| {
        let c = c.as_ref().ok_or(Fail::Null("coupling"))?;
        *terminal_tv.as_mut().ok_or(Fail::Null("terminal_tv"))? = c.inner.terminal_tv;
        *martingale.as_mut().ok_or(Fail::Null("martingale"))? = c.inner.martingale_residual;
        Ok(())
    })
}

/// Copies the grid states into `out[0..n_states]`.
///
/// # Safety
/// `c` must be a live coupling handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn wm_coupling_states(c: *const WmCoupling, out: *mut f64, len: usize) -> WmStatus {
    guard(|| {
        let c = c.as_ref().ok_or(Fail::Null("coupling"))?;
        out_slice(out, len, c.inner.states.len(), "out")?.copy_from_slice(&c.inner.states);
        Ok(())
    })
}

/// Copies the row-major `n_states x n_states` kernel of `step` into `out`.
///
/// # Safety
/// `c` must be a live coupling handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn wm_coupling_kernel(c: *const WmCoupling, step: usize, out: *mut f64, len: usize) -> WmStatus {
    guard(|| {
        let c = c.as_ref().ok_or(Fail::Null("coupling"))?;
        let k = c
            .inner
            .kernels
            .get(step)
            .ok_or_else(|| Fail::Range(format!("step {step} out of range ({} steps)", c.inner.n_steps)))?;
        out_slice(out, len, k.len(), "out")?.copy_from_slice(k);
        Ok(())
    })
}

/// Releases a coupling; null is ignored.
///
/// # Safety
/// `c` must be null or a coupling handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wm_coupling_free(c: *mut WmCoupling) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}
