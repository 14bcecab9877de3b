//! C interface to loccforge.
//!
//! Objects are opaque handles created and released through this interface.
//! Every fallible function returns an [`LfStatus`]; on failure the message is
//! kept per thread and can be read with [`lf_last_error`]. Matrices cross the
//! boundary as separate row-major real and imaginary arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use loccforge::experiment::ExperimentConfig;
use loccforge::linalg::{c, Mat};
use loccforge::objectives::{Evaluation, Objective};
use loccforge::optimizer::{maximize_multi, OptimOptions, OptimResult, OptimStatus};
use loccforge::protocol::ProtocolDocument;
use loccforge::sdp::{ppt_avg_fidelity_bound, ppt_fidelity_bound, ppt_merging_bound};
use loccforge::state::{coherent_information, von_neumann_entropy, PureState, QState};
use loccforge::Error;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Dimension = 4,
    Numerical = 5,
    Infeasible = 6,
    Io = 7,
    Document = 8,
    Panic = 9,
}

/// Optimization termination reason.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfOptimStatus {
    Converged = 0,
    MaxIters = 1,
    LineSearchFailed = 2,
}

/// Gradient-descent settings; see [`lf_optim_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LfOptimOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub init_step: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl From<LfOptimOptions> for OptimOptions {
    fn from(o: LfOptimOptions) -> Self {
        OptimOptions {
            max_iters: o.max_iters,
            grad_tol: o.grad_tol,
            armijo_c: o.armijo_c,
            backtrack_factor: o.backtrack_factor,
            init_step: o.init_step,
            restarts: o.restarts,
            seed: o.seed,
        }
    }
}

impl From<OptimOptions> for LfOptimOptions {
    fn from(o: OptimOptions) -> Self {
        LfOptimOptions {
            max_iters: o.max_iters,
            grad_tol: o.grad_tol,
            armijo_c: o.armijo_c,
            backtrack_factor: o.backtrack_factor,
            init_step: o.init_step,
            restarts: o.restarts,
            seed: o.seed,
        }
    }
}

/// An objective built from an experiment configuration.
pub struct LfObjective {
    objective: Objective,
    options: OptimOptions,
}

/// Outcome of an optimization.
pub struct LfResult {
    protocol_json: CString,
    best: OptimResult,
    eval: Evaluation,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let s = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

fn status_of(e: &Error) -> LfStatus {
    match e {
        Error::Dimension(_) | Error::SubsystemIndex { .. } | Error::Permutation(_) | Error::Layout(_) => LfStatus::Dimension,
        Error::NotNormalized(_) | Error::Invariant { .. } | Error::RankDeficient(_) | Error::ProbabilityFloor(_) | Error::Solver(_) => {
            LfStatus::Numerical
        }
        Error::Parameter(_) => LfStatus::InvalidArgument,
        Error::Infeasible(_) => LfStatus::Infeasible,
        Error::Config { .. } => LfStatus::Config,
        Error::Document(_) | Error::Json(_) => LfStatus::Document,
        Error::Io(_) => LfStatus::Io,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (LfStatus, String)>) -> LfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LfStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LfStatus::Panic
        }
    }
}

trait Lift<T> {
    fn lift(self) -> Result<T, (LfStatus, String)>;
}

impl<T> Lift<T> for Result<T, Error> {
    fn lift(self) -> Result<T, (LfStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (LfStatus, String) {
    (LfStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (LfStatus, String) {
    (LfStatus::InvalidArgument, msg.into())
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (LfStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn read_matrix(re: *const f64, im: *const f64, dim: usize) -> Result<Mat, (LfStatus, String)> {
    if re.is_null() {
        return Err(null("real part"));
    }
    if dim == 0 {
        return Err(invalid("dimension must be positive"));
    }
    let n = dim.checked_mul(dim).ok_or_else(|| invalid("dimension overflows"))?;
    let re = std::slice::from_raw_parts(re, n);
    let im = if im.is_null() { None } else { Some(std::slice::from_raw_parts(im, n)) };
    Ok(Mat::from_fn(dim, dim, |r, col| c(re[r * dim + col], im.map_or(0.0, |v| v[r * dim + col]))))
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), (LfStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = v;
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length, 0 if none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lf_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

#[no_mangle]
pub extern "C" fn lf_optim_options_default() -> LfOptimOptions {
    OptimOptions::default().into()
}

/// Builds the objective of grid point `point` (or merging sample `sample`)
/// of an experiment configuration given as TOML text.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_objective_from_toml(
    config_toml: *const c_char,
    point: usize,
    sample: usize,
    out: *mut *mut LfObjective,
) -> LfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(config_toml, "config_toml")?;
        let cfg = ExperimentConfig::from_toml(text).lift()?;
        cfg.validate().lift()?;
        let objective = cfg.objective(point, sample).lift()?;
        *out = Box::into_raw(Box::new(LfObjective { objective, options: cfg.optimizer }));
        Ok(())
    })
}

/// # Safety
/// `obj` must be null or a handle from [`lf_objective_from_toml`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lf_objective_free(obj: *mut LfObjective) {
    if !obj.is_null() {
        drop(Box::from_raw(obj));
    }
}

/// Optimizer settings stored in the configuration the objective came from.
///
/// # Safety
/// `obj` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_objective_options(obj: *const LfObjective, out: *mut LfOptimOptions) -> LfStatus {
    guard(|| {
        let obj = obj.as_ref().ok_or_else(|| null("obj"))?;
        write_out(out, obj.options.into())
    })
}

/// Number of Stiefel factors in the protocol parameterization.
///
/// # Safety
/// `obj` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_objective_num_parts(obj: *const LfObjective, out: *mut usize) -> LfStatus {
    guard(|| {
        let obj = obj.as_ref().ok_or_else(|| null("obj"))?;
        write_out(out, obj.objective.shapes().len())
    })
}

/// Objective value at the identity protocol.
///
/// # Safety
/// `obj` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_objective_identity_value(obj: *const LfObjective, out: *mut f64) -> LfStatus {
    guard(|| {
        let obj = obj.as_ref().ok_or_else(|| null("obj"))?;
        let x = obj.objective.protocol().identity_point().lift()?;
        write_out(out, obj.objective.value(&x).lift()?)
    })
}

/// Evaluates a protocol document (JSON) against the objective. The document
/// must describe the same protocol layout.
///
/// # Safety
/// `obj` must be a live handle, `protocol_json` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lf_objective_evaluate_json(obj: *const LfObjective, protocol_json: *const c_char, out: *mut f64) -> LfStatus {
    guard(|| {
        let obj = obj.as_ref().ok_or_else(|| null("obj"))?;
        let doc = ProtocolDocument::from_json(read_str(protocol_json, "protocol_json")?).lift()?;
        let (protocol, x) = doc.restore().lift()?;
        if protocol != *obj.objective.protocol() {
            return Err((LfStatus::Dimension, "document protocol differs from the objective's".into()));
        }
        write_out(out, obj.objective.value(&x).lift()?)
    })
}

/// Maximizes the objective with multi-restart gradient descent.
///
/// # Safety
/// `obj` must be a live handle, `opts` null (use the configuration's
/// settings) or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lf_objective_optimize(obj: *const LfObjective, opts: *const LfOptimOptions, out: *mut *mut LfResult) -> LfStatus {
    guard(|| {
        let obj = obj.as_ref().ok_or_else(|| null("obj"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let options: OptimOptions = match opts.as_ref() {
            Some(o) => (*o).into(),
            None => obj.options,
        };
        let res = maximize_multi(&obj.objective, &options).lift()?;
        let eval = obj.objective.evaluate(&res.best.point).lift()?;
        let doc = ProtocolDocument::new(obj.objective.protocol(), &res.best.point)
            .lift()?
            .with_metadata("value", eval.value.into())
            .with_metadata("seed", options.seed.into());
        let json = CString::new(doc.to_json().lift()?).map_err(|_| invalid("document contains NUL"))?;
        *out = Box::into_raw(Box::new(LfResult { protocol_json: json, best: res.best, eval }));
        Ok(())
    })
}

/// # Safety
/// `res` must be null or a handle from [`lf_objective_optimize`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lf_result_free(res: *mut LfResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Best objective value.
///
/// # Safety
/// `res` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_result_value(res: *const LfResult, out: *mut f64) -> LfStatus {
    guard(|| {
        let res = res.as_ref().ok_or_else(|| null("res"))?;
        write_out(out, res.eval.value)
    })
}

/// Probability of the selected branch; writes -1 for averaged objectives.
///
/// # Safety
/// `res` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_result_success_probability(res: *const LfResult, out: *mut f64) -> LfStatus {
    guard(|| {
        let res = res.as_ref().ok_or_else(|| null("res"))?;
        write_out(out, res.eval.success_probability.unwrap_or(-1.0))
    })
}

/// Termination reason and iteration count of the best restart.
///
/// # Safety
/// `res` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_result_status(res: *const LfResult, status: *mut LfOptimStatus, iterations: *mut usize) -> LfStatus {
    guard(|| {
        let res = res.as_ref().ok_or_else(|| null("res"))?;
        let s = match res.best.trace.status {
            OptimStatus::Converged => LfOptimStatus::Converged,
            OptimStatus::MaxIters => LfOptimStatus::MaxIters,
            OptimStatus::LineSearchFailed => LfOptimStatus::LineSearchFailed,
        };
        write_out(status, s)?;
        write_out(iterations, res.best.trace.iterations())
    })
}

/// The optimized protocol as a JSON document, valid while `res` lives.
///
/// # Safety
/// `res` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lf_result_protocol_json(res: *const LfResult) -> *const c_char {
    match res.as_ref() {
        Some(r) => r.protocol_json.as_ptr(),
        None => ptr::null(),
    }
}

unsafe fn bipartite(re: *const f64, im: *const f64, dim_a: usize, dim_b: usize) -> Result<QState, (LfStatus, String)> {
    let dim = dim_a.checked_mul(dim_b).ok_or_else(|| invalid("dimension overflows"))?;
    QState::new(read_matrix(re, im, dim)?, vec![dim_a, dim_b]).lift()
}

/// PPT upper bound on the average fidelity with the `d`-dimensional maximally
/// entangled state, for a state on `A ⊗ B`.
///
/// # Safety
/// `re` (and `im` unless null) must hold `(dim_a·dim_b)²` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lf_ppt_avg_fidelity_bound(
    re: *const f64,
    im: *const f64,
    dim_a: usize,
    dim_b: usize,
    d: usize,
    out: *mut f64,
) -> LfStatus {
    guard(|| {
        let rho = bipartite(re, im, dim_a, dim_b)?;
        write_out(out, ppt_avg_fidelity_bound(&rho, d).lift()?.value)
    })
}

/// PPT upper bound on the fidelity reached with success probability `p`.
///
/// # Safety
/// As [`lf_ppt_avg_fidelity_bound`].
#[no_mangle]
pub unsafe extern "C" fn lf_ppt_fidelity_bound(
    re: *const f64,
    im: *const f64,
    dim_a: usize,
    dim_b: usize,
    d: usize,
    p: f64,
    out: *mut f64,
) -> LfStatus {
    guard(|| {
        let rho = bipartite(re, im, dim_a, dim_b)?;
        write_out(out, ppt_fidelity_bound(&rho, d, p).lift()?.value)
    })
}

/// PPT upper bound on the merging fidelity of a three-qubit pure state
/// `ψ_RAB` (8 amplitudes).
///
/// # Safety
/// `re` (and `im` unless null) must hold 8 values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lf_ppt_merging_bound(re: *const f64, im: *const f64, out: *mut f64) -> LfStatus {
    guard(|| {
        if re.is_null() {
            return Err(null("re"));
        }
        let r = std::slice::from_raw_parts(re, 8);
        let i = if im.is_null() { None } else { Some(std::slice::from_raw_parts(im, 8)) };
        let amp = loccforge::linalg::CVec::from_fn(8, |k, _| c(r[k], i.map_or(0.0, |v| v[k])));
        let psi = PureState::new(amp, vec![2, 2, 2]).lift()?;
        write_out(out, ppt_merging_bound(&psi).lift()?.value)
    })
}

/// Von Neumann entropy in bits of a normalized density matrix.
///
/// # Safety
/// `re` (and `im` unless null) must hold `dim²` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lf_entropy(re: *const f64, im: *const f64, dim: usize, out: *mut f64) -> LfStatus {
    guard(|| {
        let rho = QState::new(read_matrix(re, im, dim)?, vec![dim]).lift()?;
        write_out(out, von_neumann_entropy(&rho).lift()?)
    })
}

/// Coherent information `I(A⟩B) = S(B) − S(AB)` in bits.
///
/// # Safety
/// As [`lf_ppt_avg_fidelity_bound`].
#[no_mangle]
pub unsafe extern "C" fn lf_coherent_information(re: *const f64, im: *const f64, dim_a: usize, dim_b: usize, out: *mut f64) -> LfStatus {
    guard(|| {
        let rho = bipartite(re, im, dim_a, dim_b)?;
        write_out(out, coherent_information(&rho, 1).lift()?)
    })
}
