//! C ABI for netroots.
//!
//! Graphs and results are opaque handles owned by the caller and released
//! with the matching `*_free` function. Every fallible call returns an
//! [`NrStatus`]; on failure [`nr_last_error`] describes the problem.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use netroots::gibbs::{run_chains, ChainConfig, ChainRun};
use netroots::inference::credible_set;
use netroots::{Error, LabeledGraph, ModelParams};
use rand::SeedableRng;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Disconnected = 4,
    Internal = 5,
    Panic = 6,
}

/// Model variants.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NrVariant {
    SingleRoot = 0,
    FixedK = 1,
    RandomK = 2,
    Seq = 3,
    SeqStar = 4,
}

/// Model parameters. Fields a variant does not use are ignored.
/// `alpha = INFINITY` selects uniform attachment.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct NrParams {
    pub variant: NrVariant,
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub alpha0: f64,
    pub theta: f64,
    pub alpha_tilde: f64,
    pub beta_tilde: f64,
    pub eta: f64,
}

/// Sampler settings. Zero fields take the library default for the variant.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct NrChainOptions {
    pub seed: u64,
    pub burn_in: usize,
    pub max_sweeps: usize,
    pub num_chains: usize,
    pub convergence_tol: f64,
}

/// Opaque graph handle.
pub struct NrGraph(LabeledGraph);

/// Opaque inference result handle.
pub struct NrResult(ChainRun);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NrStatus {
    match e {
        Error::Parse { .. } => NrStatus::Parse,
        Error::Disconnected { .. } => NrStatus::Disconnected,
        Error::Io(_) | Error::Json(_) | Error::InvalidState(_) => NrStatus::Internal,
        _ => NrStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (NrStatus, String)>) -> NrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NrStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("panic inside netroots".into());
            NrStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (NrStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (NrStatus, String) {
    (NrStatus::NullPointer, format!("{name} is null"))
}

fn to_params(p: &NrParams) -> ModelParams {
    match p.variant {
        NrVariant::SingleRoot => ModelParams::single_root(p.alpha, p.beta),
        NrVariant::FixedK => ModelParams::fixed_k(p.alpha, p.beta, p.k),
        NrVariant::RandomK => ModelParams::random_k(p.alpha, p.beta, p.alpha0),
        NrVariant::Seq => ModelParams::seq(p.alpha, p.beta, p.theta, p.alpha_tilde, p.beta_tilde),
        NrVariant::SeqStar => ModelParams::seq_star(p.alpha, p.beta, p.theta, p.alpha_tilde, p.beta_tilde, p.eta),
    }
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default parameters for a variant: linear preferential attachment,
/// `k = 2`, `alpha0 = 1`, `theta = 1.5`, `alpha_tilde = beta_tilde = 1`, `eta = 0`.
#[no_mangle]
pub extern "C" fn nr_params_default(variant: NrVariant) -> NrParams {
    NrParams {
        variant,
        alpha: 0.0,
        beta: 1.0,
        k: 2,
        alpha0: 1.0,
        theta: 1.5,
        alpha_tilde: 1.0,
        beta_tilde: 1.0,
        eta: 0.0,
    }
}

#[no_mangle]
pub extern "C" fn nr_chain_options_default() -> NrChainOptions {
    NrChainOptions {
        seed: 0,
        burn_in: 0,
        max_sweeps: 0,
        num_chains: 0,
        convergence_tol: 0.0,
    }
}

/// Builds a graph on nodes `0..n` from `m` edges given as `2m` endpoints.
///
/// # Safety
/// `edges` must point to `2 * m` readable values (it may be null when `m == 0`);
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nr_graph_from_edges(n: usize, edges: *const u32, m: usize, out: *mut *mut NrGraph) -> NrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let flat: &[u32] = if m == 0 {
            &[]
        } else if edges.is_null() {
            return Err(null("edges"));
        } else {
            std::slice::from_raw_parts(edges, 2 * m)
        };
        let mut pairs = Vec::with_capacity(m);
        for e in flat.chunks_exact(2) {
            let (u, v) = (e[0] as usize, e[1] as usize);
            if u >= n || v >= n {
                return Err((NrStatus::InvalidArgument, format!("edge ({u}, {v}) out of range for n={n}")));
            }
            pairs.push((u, v));
        }
        *out = Box::into_raw(Box::new(NrGraph(LabeledGraph::from_edges(n, pairs))));
        Ok(())
    })
}

/// Parses a whitespace-separated edge list (one `u v` pair per line, `#`
/// comments allowed). Node labels are arbitrary tokens.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nr_graph_parse(text: *const c_char, out: *mut *mut NrGraph) -> NrStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let s = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| (NrStatus::Parse, format!("input is not UTF-8: {e}")))?;
        let g = LabeledGraph::load_edge_list(s).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(NrGraph(g)));
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a handle returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nr_graph_free(g: *mut NrGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn nr_graph_num_nodes(g: *const NrGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.n())
}

/// # Safety
/// `g` must be a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn nr_graph_num_edges(g: *const NrGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.m())
}

/// Copies the label of node `u` into `buf` (NUL-terminated, truncated to
/// `cap`). Writes the full label length including the NUL to `len`.
///
/// # Safety
/// `g` must be a live graph handle, `buf` must hold `cap` bytes, `len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nr_graph_label(g: *const NrGraph, u: usize, buf: *mut c_char, cap: usize, len: *mut usize) -> NrStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("g"))?;
        if len.is_null() {
            return Err(null("len"));
        }
        if u >= g.0.n() {
            return Err((NrStatus::InvalidArgument, format!("node {u} out of range")));
        }
        let label = g.0.label(u).as_bytes();
        *len = label.len() + 1;
        if cap > 0 {
            if buf.is_null() {
                return Err(null("buf"));
            }
            let k = label.len().min(cap - 1);
            ptr::copy_nonoverlapping(label.as_ptr().cast(), buf, k);
            *buf.add(k) = 0;
        }
        Ok(())
    })
}

/// Runs the Gibbs sampler and stores the posterior root distribution.
///
/// # Safety
/// `g` must be a live graph handle; `params` and `out` must be valid;
/// `opts` may be null for defaults.
#[no_mangle]
pub unsafe extern "C" fn nr_infer(
    g: *const NrGraph,
    params: *const NrParams,
    opts: *const NrChainOptions,
    out: *mut *mut NrResult,
) -> NrStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("g"))?;
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mp = to_params(p);
        mp.validate().map_err(lib_err)?;
        let mut cfg = ChainConfig::for_params(&mp);
        if let Some(o) = opts.as_ref() {
            cfg.seed = o.seed;
            if o.burn_in > 0 {
                cfg.burn_in = o.burn_in;
            }
            if o.max_sweeps > 0 {
                cfg.max_sweeps = o.max_sweeps;
            }
            if o.num_chains > 0 {
                cfg.num_chains = o.num_chains;
            }
            if o.convergence_tol > 0.0 {
                cfg.convergence_tol = o.convergence_tol;
            }
        }
        let run = run_chains(&g.0, &mp, &cfg, &mut |_| {}).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(NrResult(run)));
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a handle returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nr_result_free(r: *mut NrResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Number of nodes covered by the result.
///
/// # Safety
/// `r` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn nr_result_len(r: *const NrResult) -> usize {
    r.as_ref().map_or(0, |r| r.0.root_distribution.len())
}

/// 1 if the chains met the convergence tolerance, 0 otherwise.
///
/// # Safety
/// `r` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn nr_result_converged(r: *const NrResult) -> i32 {
    r.as_ref().map_or(0, |r| i32::from(r.0.diagnostics.converged))
}

/// Copies the per-node root probabilities into `probs` (`len` entries).
///
/// # Safety
/// `r` must be a live result handle and `probs` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nr_result_root_probs(r: *const NrResult, probs: *mut f64, len: usize) -> NrStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("r"))?;
        let src = r.0.root_distribution.probs();
        if len != src.len() {
            return Err((NrStatus::InvalidArgument, format!("buffer has {len} entries, need {}", src.len())));
        }
        if len > 0 {
            if probs.is_null() {
                return Err(null("probs"));
            }
            ptr::copy_nonoverlapping(src.as_ptr(), probs, len);
        }
        Ok(())
    })
}

/// Credible set at level `1 - epsilon`. Writes up to `cap` node indices in
/// decreasing probability to `nodes` and the set size to `len`.
///
/// # Safety
/// `r` must be a live result handle, `nodes` must hold `cap` entries, `len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nr_result_credible_set(
    r: *const NrResult,
    epsilon: f64,
    seed: u64,
    nodes: *mut usize,
    cap: usize,
    len: *mut usize,
) -> NrStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("r"))?;
        if len.is_null() {
            return Err(null("len"));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let set = credible_set(&r.0.root_distribution, epsilon, &mut rng).map_err(lib_err)?;
        *len = set.nodes.len();
        let k = set.nodes.len().min(cap);
        if k > 0 {
            if nodes.is_null() {
                return Err(null("nodes"));
            }
            ptr::copy_nonoverlapping(set.nodes.as_ptr(), nodes, k);
        }
        Ok(())
    })
}
