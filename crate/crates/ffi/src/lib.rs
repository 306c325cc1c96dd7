//! C ABI over the simulator core. Handles are opaque pointers owned by the
//! library; every fallible call returns a status code and leaves a
//! human-readable message retrievable via [`plu_last_error_message`].
//! The matching header lives at `include/push_lsvrg.h` and is kept in sync
//! by a test.
//!
//! Thread safety: handles are immutable after construction and may be
//! shared across threads; the last-error message is thread-local.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use push_lsvrg::harness::{self, RunMeta};
use push_lsvrg::netgraph::{generate_graph, DirectedNetwork, GraphKind};
use push_lsvrg::objective::{
    make_logistic, make_synthetic_quadratic_with_spread, partition_evenly, Dataset, Objective,
    QuadraticObjective,
};
use push_lsvrg::solver::{self, AlgoConfig, Algorithm, InitKind, RunContext};
use push_lsvrg::theory::{
    check_stability_certificate, prop1_step_hypothesis, theorem_step_bound, TheoryConstants,
};
use push_lsvrg::CoreError;

/// Status codes mirrored in the header.
pub const PLU_OK: i32 = 0;
pub const PLU_ERR_NULL_POINTER: i32 = 1;
pub const PLU_ERR_UTF8: i32 = 2;
pub const PLU_ERR_INVALID_ARGUMENT: i32 = 3;
pub const PLU_ERR_NOT_STRONGLY_CONNECTED: i32 = 4;
pub const PLU_ERR_BUFFER_TOO_SMALL: i32 = 5;
pub const PLU_ERR_NOT_CONVERGED: i32 = 6;
pub const PLU_ERR_IO: i32 = 7;
pub const PLU_ERR_INTERNAL: i32 = 8;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized: String = message
        .chars()
        .map(|c| if c == '\0' { ' ' } else { c })
        .collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &CoreError) -> i32 {
    match err {
        CoreError::NotStronglyConnected | CoreError::GenerationRetriesExhausted(_) => {
            PLU_ERR_NOT_STRONGLY_CONNECTED
        }
        CoreError::Io { .. } => PLU_ERR_IO,
        CoreError::PowerIterationDiverged(_) | CoreError::ReferenceSolverDiverged(_) => {
            PLU_ERR_NOT_CONVERGED
        }
        _ => PLU_ERR_INVALID_ARGUMENT,
    }
}

fn fail(err: CoreError) -> i32 {
    let code = status_of(&err);
    set_error(&err.to_string());
    code
}

/// Runs the body with panic isolation; panics surface as
/// `PLU_ERR_INTERNAL` instead of unwinding across the boundary.
fn guarded(body: impl FnOnce() -> i32) -> i32 {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic");
            PLU_ERR_INTERNAL
        }
    }
}

unsafe fn utf8_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, i32> {
    if ptr.is_null() {
        set_error(&format!("{name} is null"));
        return Err(PLU_ERR_NULL_POINTER);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{name} is not valid UTF-8"));
        PLU_ERR_UTF8
    })
}

macro_rules! nonnull {
    ($ptr:expr, $name:literal) => {
        match unsafe { $ptr.as_ref() } {
            Some(r) => r,
            None => {
                set_error(concat!($name, " is null"));
                return PLU_ERR_NULL_POINTER;
            }
        }
    };
}

/// Opaque network handle.
pub struct PluNetwork {
    inner: DirectedNetwork,
}

/// Opaque objective handle.
pub struct PluObjective {
    inner: FfiObjective,
}

enum FfiObjective {
    Quadratic(QuadraticObjective),
    Logistic(push_lsvrg::objective::LogisticObjective),
}

impl FfiObjective {
    fn as_dyn(&self) -> &dyn Objective {
        match self {
            FfiObjective::Quadratic(q) => q,
            FfiObjective::Logistic(l) => l,
        }
    }

    fn quadratic(&self) -> Option<&QuadraticObjective> {
        match self {
            FfiObjective::Quadratic(q) => Some(q),
            FfiObjective::Logistic(_) => None,
        }
    }
}

/// Opaque trace handle.
pub struct PluTrace {
    inner: push_lsvrg::harness::Trace,
}

/// Certificate summary mirrored in the header (field-for-field).
#[repr(C)]
pub struct PluCertificate {
    pub alpha: f64,
    pub rho: f64,
    pub eta: f64,
    pub theorem_bound: f64,
    pub prop1_hypothesis: f64,
    pub sigma_a: f64,
    pub delta: f64,
    pub elementwise_ok: i32,
    pub admissible: i32,
}

/// Message for the most recent error on this thread; valid until the next
/// failing call. Never null.
#[no_mangle]
pub extern "C" fn plu_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Generates a network. `kind` is one of the config-file names
/// (`ring`, `mesh`, `directed_exponential`, `symmetric_exponential`,
/// `full`, `random_strongly_connected`, `random_undirected`,
/// `random_regular`). `ratio` and `out_degree` are consulted only by the
/// random kinds.
///
/// # Safety
/// `kind` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn plu_network_generate(
    kind: *const c_char,
    m: u64,
    ratio: f64,
    out_degree: u64,
    seed: u64,
    out: *mut *mut PluNetwork,
) -> i32 {
    guarded(|| {
        if out.is_null() {
            set_error("out is null");
            return PLU_ERR_NULL_POINTER;
        }
        let kind_name = match utf8_arg(kind, "kind") {
            Ok(s) => s,
            Err(code) => return code,
        };
        let graph_kind = match kind_name {
            "ring" => GraphKind::Ring,
            "mesh" => GraphKind::Mesh,
            "directed_exponential" => GraphKind::DirectedExponential,
            "symmetric_exponential" => GraphKind::SymmetricExponential,
            "full" => GraphKind::Full,
            "random_strongly_connected" => GraphKind::RandomStronglyConnected { ratio },
            "random_undirected" => GraphKind::RandomUndirected { ratio },
            "random_regular" => GraphKind::RandomRegular {
                out_degree: out_degree as usize,
            },
            other => {
                set_error(&format!("unknown graph kind '{other}'"));
                return PLU_ERR_INVALID_ARGUMENT;
            }
        };
        match generate_graph(graph_kind, m as usize, seed) {
            Ok(net) => {
                *out = Box::into_raw(Box::new(PluNetwork { inner: net }));
                PLU_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Loads a network from the documented edge-list format.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn plu_network_read_edge_list(
    path: *const c_char,
    out: *mut *mut PluNetwork,
) -> i32 {
    guarded(|| {
        if out.is_null() {
            set_error("out is null");
            return PLU_ERR_NULL_POINTER;
        }
        let path = match utf8_arg(path, "path") {
            Ok(s) => s,
            Err(code) => return code,
        };
        match DirectedNetwork::read_edge_list(Path::new(path)) {
            Ok(net) => {
                *out = Box::into_raw(Box::new(PluNetwork { inner: net }));
                PLU_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `net` must be a handle from this library, not yet freed; passing null
/// is a no-op.
#[no_mangle]
pub unsafe extern "C" fn plu_network_free(net: *mut PluNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn plu_network_agent_count(net: *const PluNetwork) -> u64 {
    match net.as_ref() {
        Some(n) => n.inner.agents() as u64,
        None => 0,
    }
}

/// Weighted-norm contraction factor of the mixing matrix.
///
/// # Safety
/// `net` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn plu_network_sigma_a(net: *const PluNetwork, out: *mut f64) -> i32 {
    guarded(|| {
        let net = nonnull!(net, "net");
        if out.is_null() {
            set_error("out is null");
            return PLU_ERR_NULL_POINTER;
        }
        *out = net.inner.spectral().sigma_a;
        PLU_OK
    })
}

/// Copies the Perron vector into `buf` (length must be at least the agent
/// count).
///
/// # Safety
/// `net` must be a live handle; `buf` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn plu_network_perron(
    net: *const PluNetwork,
    buf: *mut f64,
    len: usize,
) -> i32 {
    guarded(|| {
        let net = nonnull!(net, "net");
        if buf.is_null() {
            set_error("buf is null");
            return PLU_ERR_NULL_POINTER;
        }
        let pi = &net.inner.spectral().pi;
        if len < pi.len() {
            set_error(&format!("buffer holds {len}, need {}", pi.len()));
            return PLU_ERR_BUFFER_TOO_SMALL;
        }
        std::ptr::copy_nonoverlapping(pi.as_ptr(), buf, pi.len());
        PLU_OK
    })
}

/// Synthetic diagonal quadratic objective (closed-form minimizer inside).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn plu_objective_quadratic(
    m: u64,
    n: u64,
    q_per_agent: u64,
    seed: u64,
    mu: f64,
    lipschitz: f64,
    spread: f64,
    out: *mut *mut PluObjective,
) -> i32 {
    guarded(|| {
        if out.is_null() {
            set_error("out is null");
            return PLU_ERR_NULL_POINTER;
        }
        match make_synthetic_quadratic_with_spread(
            m as usize,
            n as usize,
            q_per_agent as usize,
            seed,
            mu,
            lipschitz,
            spread,
        ) {
            Ok(quad) => {
                *out = Box::into_raw(Box::new(PluObjective {
                    inner: FfiObjective::Quadratic(quad),
                }));
                PLU_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Ridge-regularized logistic objective over a sample file (sparse
/// `label index:value` text or dense CSV with a `label` column). Labels
/// must be +-1 already. Samples are shuffled by `seed` and dealt evenly to
/// `m` agents.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn plu_objective_logistic_file(
    path: *const c_char,
    m: u64,
    beta: f64,
    seed: u64,
    out: *mut *mut PluObjective,
) -> i32 {
    guarded(|| {
        if out.is_null() {
            set_error("out is null");
            return PLU_ERR_NULL_POINTER;
        }
        let path = match utf8_arg(path, "path") {
            Ok(s) => s,
            Err(code) => return code,
        };
        let path = Path::new(path);
        let loaded = match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Dataset::read_csv(path, "label"),
            _ => Dataset::read_sparse(path, None),
        };
        let data = match loaded {
            Ok(d) => d,
            Err(e) => return fail(e),
        };
        let partition = partition_evenly(data.len(), m as usize, seed);
        match make_logistic(data, partition, beta) {
            Ok(obj) => {
                *out = Box::into_raw(Box::new(PluObjective {
                    inner: FfiObjective::Logistic(obj),
                }));
                PLU_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `obj` must be a handle from this library, not yet freed; null is a
/// no-op.
#[no_mangle]
pub unsafe extern "C" fn plu_objective_free(obj: *mut PluObjective) {
    if !obj.is_null() {
        drop(Box::from_raw(obj));
    }
}

/// # Safety
/// `obj` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn plu_objective_dim(obj: *const PluObjective) -> u64 {
    match obj.as_ref() {
        Some(o) => o.inner.as_dyn().dim() as u64,
        None => 0,
    }
}

fn resolve_probs(probs: *const f64, len: usize, m: usize) -> Result<Vec<f64>, i32> {
    if probs.is_null() {
        set_error("trigger_probs is null");
        return Err(PLU_ERR_NULL_POINTER);
    }
    let raw = unsafe { std::slice::from_raw_parts(probs, len) };
    let list = match raw.len() {
        1 => vec![raw[0]; m],
        l if l == m => raw.to_vec(),
        other => {
            set_error(&format!("trigger_probs length {other}, expected 1 or {m}"));
            return Err(PLU_ERR_INVALID_ARGUMENT);
        }
    };
    Ok(list)
}

fn derive_constants(
    net: &DirectedNetwork,
    obj: &dyn Objective,
    probs: &[f64],
) -> Result<TheoryConstants, CoreError> {
    TheoryConstants::derive(net, obj.strong_convexity(), obj.smoothness(), probs)
}

/// Runs one algorithm (`push_lsvrg_up`, `s_addopt`, `addopt`,
/// `push_saga`). `alpha <= 0` selects the admissible bound from the
/// convergence theorem. `stop_residual <= 0` disables early stopping.
/// `trace_csv_path` may be null. The reference solution is computed
/// internally (closed form for quadratic objectives, full-gradient descent
/// otherwise).
///
/// # Safety
/// All handles must be live; `trigger_probs` must point to `probs_len`
/// readable doubles; strings must be valid NUL-terminated UTF-8 or null
/// where documented; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn plu_run(
    net: *const PluNetwork,
    obj: *const PluObjective,
    algorithm: *const c_char,
    alpha: f64,
    trigger_probs: *const f64,
    probs_len: usize,
    seed: u64,
    max_iters: u64,
    stop_residual: f64,
    trace_csv_path: *const c_char,
    out: *mut *mut PluTrace,
) -> i32 {
    guarded(|| {
        let net = nonnull!(net, "net");
        let obj = nonnull!(obj, "obj");
        if out.is_null() {
            set_error("out is null");
            return PLU_ERR_NULL_POINTER;
        }
        let algorithm = match utf8_arg(algorithm, "algorithm") {
            Ok(s) => s,
            Err(code) => return code,
        };
        let algorithm = match Algorithm::parse(algorithm) {
            Ok(a) => a,
            Err(e) => return fail(e),
        };
        let m = net.inner.agents();
        let probs = match resolve_probs(trigger_probs, probs_len, m) {
            Ok(p) => p,
            Err(code) => return code,
        };
        let dyn_obj = obj.inner.as_dyn();
        let alpha = if alpha > 0.0 {
            alpha
        } else {
            match derive_constants(&net.inner, dyn_obj, &probs) {
                Ok(c) => theorem_step_bound(&c),
                Err(e) => return fail(e),
            }
        };
        let reference = match obj.inner.quadratic() {
            Some(quad) => harness::reference_from_closed_form(quad),
            None => match harness::solve_reference(dyn_obj, 1e-12) {
                Ok(r) => r,
                Err(e) => return fail(e),
            },
        };
        let cfg = AlgoConfig {
            algorithm,
            alpha,
            trigger_probs: probs,
            seed,
            max_iters,
            stop_residual: (stop_residual > 0.0).then_some(stop_residual),
            init: InitKind::SeededNormal,
        };
        let ctx = RunContext {
            network: &net.inner,
            objective: dyn_obj,
            reference: Some(&reference),
            accuracy: None,
            meta: RunMeta::default(),
        };
        let trace = match solver::run(&cfg, &ctx, None) {
            Ok(t) => t,
            Err(e) => return fail(e),
        };
        if !trace_csv_path.is_null() {
            let path = match utf8_arg(trace_csv_path, "trace_csv_path") {
                Ok(s) => s,
                Err(code) => return code,
            };
            if let Err(e) = trace.write_csv(Path::new(path)) {
                return fail(e);
            }
        }
        *out = Box::into_raw(Box::new(PluTrace { inner: trace }));
        PLU_OK
    })
}

/// # Safety
/// `trace` must be a handle from this library, not yet freed; null is a
/// no-op.
#[no_mangle]
pub unsafe extern "C" fn plu_trace_free(trace: *mut PluTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of recorded rows (iterations + 1 for the initial state).
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn plu_trace_len(trace: *const PluTrace) -> u64 {
    match trace.as_ref() {
        Some(t) => t.inner.records.len() as u64,
        None => 0,
    }
}

/// # Safety
/// `trace` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn plu_trace_final_residual(trace: *const PluTrace, out: *mut f64) -> i32 {
    guarded(|| {
        let trace = nonnull!(trace, "trace");
        if out.is_null() {
            set_error("out is null");
            return PLU_ERR_NULL_POINTER;
        }
        match trace.inner.final_record().and_then(|r| r.residual) {
            Some(res) => {
                *out = res;
                PLU_OK
            }
            None => {
                set_error("trace has no residual column");
                PLU_ERR_INVALID_ARGUMENT
            }
        }
    })
}

/// Copies the residual column into `buf` (length must cover
/// `plu_trace_len`).
///
/// # Safety
/// `trace` must be a live handle; `buf` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn plu_trace_residuals(
    trace: *const PluTrace,
    buf: *mut f64,
    len: usize,
) -> i32 {
    guarded(|| {
        let trace = nonnull!(trace, "trace");
        if buf.is_null() {
            set_error("buf is null");
            return PLU_ERR_NULL_POINTER;
        }
        let records = &trace.inner.records;
        if len < records.len() {
            set_error(&format!("buffer holds {len}, need {}", records.len()));
            return PLU_ERR_BUFFER_TOO_SMALL;
        }
        for (i, rec) in records.iter().enumerate() {
            *buf.add(i) = rec.residual.unwrap_or(f64::NAN);
        }
        PLU_OK
    })
}

/// Fills the certificate summary at `alpha` (`alpha <= 0` evaluates the
/// admissible bound itself).
///
/// # Safety
/// Handles must be live; `trigger_probs` must point to `probs_len`
/// readable doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn plu_theory_certificate(
    net: *const PluNetwork,
    obj: *const PluObjective,
    trigger_probs: *const f64,
    probs_len: usize,
    alpha: f64,
    out: *mut PluCertificate,
) -> i32 {
    guarded(|| {
        let net = nonnull!(net, "net");
        let obj = nonnull!(obj, "obj");
        if out.is_null() {
            set_error("out is null");
            return PLU_ERR_NULL_POINTER;
        }
        let m = net.inner.agents();
        let probs = match resolve_probs(trigger_probs, probs_len, m) {
            Ok(p) => p,
            Err(code) => return code,
        };
        let consts = match derive_constants(&net.inner, obj.inner.as_dyn(), &probs) {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        let bound = theorem_step_bound(&consts);
        let alpha = if alpha > 0.0 { alpha } else { bound };
        let report = check_stability_certificate(&consts, alpha);
        *out = PluCertificate {
            alpha: report.alpha,
            rho: report.rho,
            eta: report.eta,
            theorem_bound: bound,
            prop1_hypothesis: prop1_step_hypothesis(&consts),
            sigma_a: consts.sigma_a,
            delta: consts.delta,
            elementwise_ok: report.elementwise_ok as i32,
            admissible: report.admissible as i32,
        };
        PLU_OK
    })
}
