//! C interface to `nsbm`.
//!
//! Objects are opaque heap handles released with the matching `*_free`
//! function. Every fallible call returns an [`NsbmStatus`]; on failure the
//! message is available from [`nsbm_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nsbm::inference::{mpl_fit, vem_fit, FitOptions, HARD_TO_SOFT_TAU};
use nsbm::metrics::{ari, nmi};
use nsbm::sdp::{sdp_init, SdpConfig};
use nsbm::simgen::{generate_scenario, Scenario, ScenarioSpec};
use nsbm::{Coefficients, Covariates, Graph, Labels, NsbmError, SoftLabels};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsbmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    Numerical = 5,
    Degenerate = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsbmScenario {
    A = 0,
    B = 1,
}

/// Undirected simple graph.
pub struct NsbmGraph(Graph);

/// Row-major `n x p` covariate matrix.
pub struct NsbmCovariates(Covariates);

/// Hard community labels in `0..k`.
pub struct NsbmLabels(Labels);

/// Output of a refinement (MPL or VEM).
pub struct NsbmFit {
    labels: Labels,
    beta: Coefficients,
    objective: f64,
    converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &NsbmError) -> NsbmStatus {
    match err {
        NsbmError::DimensionMismatch(_) => NsbmStatus::DimensionMismatch,
        NsbmError::NonFinite(_) => NsbmStatus::NonFinite,
        NsbmError::SingularInformation | NsbmError::Eigen => NsbmStatus::Numerical,
        NsbmError::DegenerateGraph(_) => NsbmStatus::Degenerate,
        NsbmError::Io(_) | NsbmError::Json(_) | NsbmError::Parse { .. } | NsbmError::MissingInput(_) => NsbmStatus::Io,
        _ => NsbmStatus::InvalidInput,
    }
}

struct Fail(NsbmStatus, String);

impl From<NsbmError> for Fail {
    fn from(e: NsbmError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> NsbmStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NsbmStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            NsbmStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(NsbmStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail(NsbmStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(NsbmStatus::NullPointer, "output pointer is null".into()));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn check_out<T>(out: *mut T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(NsbmStatus::NullPointer, "output pointer is null".into()));
    }
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn nsbm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a graph on `n` nodes from `m` edges given as `2m` node ids.
///
/// # Safety
/// `edges` must point to `2 * m` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsbm_graph_from_edges(
    n: usize,
    edges: *const u32,
    m: usize,
    out: *mut *mut NsbmGraph,
) -> NsbmStatus {
    guard(|| {
        let ids = slice(edges, 2 * m, "edges")?;
        let g = Graph::from_edges(n, ids.chunks_exact(2).map(|e| (e[0] as usize, e[1] as usize)))?;
        write_out(out, NsbmGraph(g))
    })
}

/// # Safety
/// `g` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nsbm_graph_free(g: *mut NsbmGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nsbm_graph_node_count(g: *const NsbmGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.n())
}

/// # Safety
/// `g` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nsbm_graph_edge_count(g: *const NsbmGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.edge_count())
}

/// # Safety
/// `values` must point to `n * p` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsbm_covariates_new(
    n: usize,
    p: usize,
    values: *const f64,
    out: *mut *mut NsbmCovariates,
) -> NsbmStatus {
    guard(|| {
        let v = slice(values, n * p, "values")?;
        write_out(out, NsbmCovariates(Covariates::new(n, p, v.to_vec())?))
    })
}

/// # Safety
/// `x` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nsbm_covariates_free(x: *mut NsbmCovariates) {
    if !x.is_null() {
        drop(Box::from_raw(x));
    }
}

/// # Safety
/// `x` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nsbm_covariates_dim(x: *const NsbmCovariates) -> usize {
    x.as_ref().map_or(0, |x| x.0.p())
}

/// # Safety
/// `values` must point to `n` readable labels; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsbm_labels_new(
    n: usize,
    values: *const u32,
    k: usize,
    out: *mut *mut NsbmLabels,
) -> NsbmStatus {
    guard(|| {
        let v = slice(values, n, "values")?;
        let labels = Labels::new(v.iter().map(|&c| c as usize).collect(), k)?;
        write_out(out, NsbmLabels(labels))
    })
}

/// # Safety
/// `c` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nsbm_labels_free(c: *mut NsbmLabels) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// # Safety
/// `c` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nsbm_labels_len(c: *const NsbmLabels) -> usize {
    c.as_ref().map_or(0, |c| c.0.len())
}

/// # Safety
/// `c` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nsbm_labels_k(c: *const NsbmLabels) -> usize {
    c.as_ref().map_or(0, |c| c.0.k())
}

/// Copies the labels into `buf`, which must hold `len` values with
/// `len == nsbm_labels_len(c)`.
///
/// # Safety
/// `buf` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn nsbm_labels_copy(c: *const NsbmLabels, buf: *mut u32, len: usize) -> NsbmStatus {
    guard(|| {
        let c = deref(c, "labels")?;
        copy_labels(&c.0, buf, len)
    })
}

unsafe fn copy_labels(c: &Labels, buf: *mut u32, len: usize) -> Result<(), Fail> {
    if len != c.len() {
        return Err(Fail(
            NsbmStatus::DimensionMismatch,
            format!("buffer holds {len} labels, expected {}", c.len()),
        ));
    }
    check_out(buf)?;
    let dst = std::slice::from_raw_parts_mut(buf, len);
    for (d, &s) in dst.iter_mut().zip(c.as_slice()) {
        *d = s as u32;
    }
    Ok(())
}

/// Draws a network, covariates and planted labels from a simulation
/// scenario.
///
/// # Safety
/// The three output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsbm_simulate(
    scenario: NsbmScenario,
    n: usize,
    seed: u64,
    graph: *mut *mut NsbmGraph,
    covariates: *mut *mut NsbmCovariates,
    labels: *mut *mut NsbmLabels,
) -> NsbmStatus {
    guard(|| {
        check_out(graph)?;
        check_out(covariates)?;
        check_out(labels)?;
        let s = match scenario {
            NsbmScenario::A => Scenario::A,
            NsbmScenario::B => Scenario::B,
        };
        let sample = generate_scenario(&ScenarioSpec::new(s, n), seed)?;
        write_out(graph, NsbmGraph(sample.graph))?;
        write_out(covariates, NsbmCovariates(sample.covariates))?;
        write_out(labels, NsbmLabels(sample.labels))
    })
}

/// SDP relaxation followed by k-means rounding. `iterations == 0` uses the
/// default.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsbm_sdp_init(
    g: *const NsbmGraph,
    x: *const NsbmCovariates,
    k: usize,
    gamma: f64,
    lambda: f64,
    iterations: usize,
    seed: u64,
    out: *mut *mut NsbmLabels,
) -> NsbmStatus {
    guard(|| {
        let g = deref(g, "graph")?;
        let x = deref(x, "covariates")?;
        check_out(out)?;
        let mut cfg = SdpConfig::new(gamma, lambda);
        if iterations > 0 {
            cfg.iterations = iterations;
        }
        let init = sdp_init(&g.0, &x.0, &cfg, k, seed)?;
        write_out(out, NsbmLabels(init.labels))
    })
}

/// Maximum profile likelihood from `init`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsbm_mpl_fit(
    g: *const NsbmGraph,
    x: *const NsbmCovariates,
    init: *const NsbmLabels,
    out: *mut *mut NsbmFit,
) -> NsbmStatus {
    guard(|| {
        let (g, x, init) = (deref(g, "graph")?, deref(x, "covariates")?, deref(init, "labels")?);
        check_out(out)?;
        let r = mpl_fit(&g.0, &x.0, &init.0, &FitOptions::default())?;
        let objective = r.objective_trace.last().copied().unwrap_or(f64::NAN);
        write_out(
            out,
            NsbmFit {
                labels: r.labels,
                beta: r.beta,
                objective,
                converged: r.converged,
            },
        )
    })
}

/// Variational EM started from `init` softened toward uniform.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsbm_vem_fit(
    g: *const NsbmGraph,
    x: *const NsbmCovariates,
    init: *const NsbmLabels,
    out: *mut *mut NsbmFit,
) -> NsbmStatus {
    guard(|| {
        let (g, x, init) = (deref(g, "graph")?, deref(x, "covariates")?, deref(init, "labels")?);
        check_out(out)?;
        let q0 = SoftLabels::from_hard(&init.0, HARD_TO_SOFT_TAU);
        let r = vem_fit(&g.0, &x.0, &q0, &FitOptions::default())?;
        let objective = r.elbo_trace.last().copied().unwrap_or(f64::NAN);
        write_out(
            out,
            NsbmFit {
                labels: r.labels,
                beta: r.beta,
                objective,
                converged: r.converged,
            },
        )
    })
}

/// # Safety
/// `f` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nsbm_fit_free(f: *mut NsbmFit) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Final objective (profile log-likelihood or ELBO).
///
/// # Safety
/// `f` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nsbm_fit_objective(f: *const NsbmFit) -> f64 {
    f.as_ref().map_or(f64::NAN, |f| f.objective)
}

/// # Safety
/// `f` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nsbm_fit_converged(f: *const NsbmFit) -> bool {
    f.as_ref().is_some_and(|f| f.converged)
}

/// # Safety
/// `f` must be a live handle; `buf` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn nsbm_fit_labels(f: *const NsbmFit, buf: *mut u32, len: usize) -> NsbmStatus {
    guard(|| {
        let f = deref(f, "fit")?;
        copy_labels(&f.labels, buf, len)
    })
}

/// Copies the row-major `k x p` coefficients (last row zero) into `buf`.
///
/// # Safety
/// `f` must be a live handle; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nsbm_fit_beta(f: *const NsbmFit, buf: *mut f64, len: usize) -> NsbmStatus {
    guard(|| {
        let f = deref(f, "fit")?;
        let v = f.beta.values();
        if len != v.len() {
            return Err(Fail(
                NsbmStatus::DimensionMismatch,
                format!("buffer holds {len} values, expected {}", v.len()),
            ));
        }
        check_out(buf)?;
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(v);
        Ok(())
    })
}

/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsbm_nmi(a: *const NsbmLabels, b: *const NsbmLabels, out: *mut f64) -> NsbmStatus {
    guard(|| {
        let (a, b) = (deref(a, "labels")?, deref(b, "labels")?);
        check_out(out)?;
        *out = nmi(&a.0, &b.0)?;
        Ok(())
    })
}

/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsbm_ari(a: *const NsbmLabels, b: *const NsbmLabels, out: *mut f64) -> NsbmStatus {
    guard(|| {
        let (a, b) = (deref(a, "labels")?, deref(b, "labels")?);
        check_out(out)?;
        *out = ari(&a.0, &b.0)?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    #[test]
    fn null_pointers_are_reported() {
        let mut out = ptr::null_mut();
        let s = unsafe { nsbm_graph_from_edges(3, ptr::null(), 2, &mut out) };
        assert_eq!(s, NsbmStatus::NullPointer);
        let msg = unsafe { CStr::from_ptr(nsbm_last_error()) };
        assert!(msg.to_str().unwrap().contains("edges"));
        assert!(out.is_null());
    }

    #[test]
    fn error_clears_on_success() {
        let mut out = ptr::null_mut();
        unsafe {
            assert_eq!(nsbm_labels_new(2, [0, 5].as_ptr(), 2, &mut out), NsbmStatus::InvalidInput);
            assert!(!nsbm_last_error().is_null());
            assert_eq!(nsbm_labels_new(2, [0, 1].as_ptr(), 2, &mut out), NsbmStatus::Ok);
            assert!(nsbm_last_error().is_null());
            assert_eq!(nsbm_labels_k(out), 2);
            nsbm_labels_free(out);
        }
    }

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&NsbmError::SingularInformation), NsbmStatus::Numerical);
        assert_eq!(status_of(&NsbmError::DimensionMismatch("x".into())), NsbmStatus::DimensionMismatch);
    }
}
