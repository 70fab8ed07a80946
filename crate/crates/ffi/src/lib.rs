//! C ABI over the paynet library.
//!
//! Graphs and trained models cross the boundary as opaque handles created by
//! `*_load`/`*_from_edges` and released with the matching `*_free`. Every
//! fallible call returns a [`PaynetStatus`]; on failure the message is
//! available from [`paynet_last_error`] on the same thread. Output pointers
//! are only written on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use paynet::cli::{Artifact, StoredModel};
use paynet::graph::io::load_graph;
use paynet::metrics::{assortativity, mixing_matrix, powerlaw_fit, rating_labels};
use paynet::partition::{louvain, minimize_agony, modularity, AgonyMode};
use paynet::riskstats::hypergeom_tail;
use paynet::{Error, FirmMeta, PaymentGraph, Rating, Risk};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaynetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Io = 4,
    Parse = 5,
    /// The quantity is not defined for this input.
    Undefined = 6,
    /// A caller-provided buffer has the wrong length.
    BadLength = 7,
    Panic = 8,
}

/// Opaque graph handle.
pub struct PaynetGraph {
    inner: PaymentGraph,
}

/// Opaque handle to a model trained by `paynet classify train`.
pub struct PaynetModel {
    inner: StoredModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

struct Fail(PaynetStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => PaynetStatus::Io,
            Error::Csv(_) | Error::Json(_) => PaynetStatus::Parse,
            Error::Undefined(_) | Error::FitFailure(_) | Error::Divergence(_) => PaynetStatus::Undefined,
            _ => PaynetStatus::InvalidInput,
        };
        Fail(status, e.to_string())
    }
}

fn fail(status: PaynetStatus, msg: impl Into<String>) -> Fail {
    Fail(status, msg.into())
}

/// Runs `body`, turning errors and panics into a status.
fn guard<F: FnOnce() -> Result<(), Fail>>(body: F) -> PaynetStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PaynetStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PaynetStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(fail(PaynetStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(PaynetStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(PaynetStatus::NullPointer, format!("`{name}` is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| fail(PaynetStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn graph_arg<'a>(g: *const PaynetGraph) -> Result<&'a PaymentGraph, Fail> {
    g.as_ref().map(|h| &h.inner).ok_or_else(|| fail(PaynetStatus::NullPointer, "graph handle is null"))
}

fn check_len(len: usize, n: usize, name: &str) -> Result<(), Fail> {
    if len != n {
        return Err(fail(PaynetStatus::BadLength, format!("`{name}` has length {len}, expected {n}")));
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn paynet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn paynet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a graph from an edge list (`src,dst,weight`) and node file
/// (`id,status,rating,sector`).
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn paynet_graph_load(
    edges_path: *const c_char,
    nodes_path: *const c_char,
    out: *mut *mut PaynetGraph,
) -> PaynetStatus {
    guard(|| {
        let e = str_arg(edges_path, "edges_path")?;
        let n = str_arg(nodes_path, "nodes_path")?;
        let out = out_arg(out, "out")?;
        let g = load_graph(Path::new(e), Path::new(n))?;
        *out = Box::into_raw(Box::new(PaynetGraph { inner: g }));
        Ok(())
    })
}

/// Builds a graph on nodes `0..n_nodes` (ids are their decimal indices).
/// Parallel edges are merged by summing weights. `ratings` may be null;
/// otherwise it holds `n_nodes` codes 0 = L, 1 = M, 2 = H, anything else NA.
///
/// # Safety
/// `src`, `dst` and `weight` must point to `n_edges` elements each.
#[no_mangle]
pub unsafe extern "C" fn paynet_graph_from_edges(
    n_nodes: usize,
    src: *const usize,
    dst: *const usize,
    weight: *const f64,
    n_edges: usize,
    ratings: *const i32,
    out: *mut *mut PaynetGraph,
) -> PaynetStatus {
    guard(|| {
        let src = slice_arg(src, n_edges, "src")?;
        let dst = slice_arg(dst, n_edges, "dst")?;
        let weight = slice_arg(weight, n_edges, "weight")?;
        let out = out_arg(out, "out")?;
        let codes = if ratings.is_null() { None } else { Some(slice_arg(ratings, n_nodes, "ratings")?) };
        let nodes = (0..n_nodes)
            .map(|i| {
                let rating = codes
                    .and_then(|c| usize::try_from(c[i]).ok())
                    .and_then(Risk::from_index)
                    .map_or(Rating::NA, Rating::Known);
                FirmMeta { rating, ..FirmMeta::unknown(i.to_string()) }
            })
            .collect();
        let edges = (0..n_edges).map(|k| (src[k], dst[k], weight[k])).collect();
        let g = PaymentGraph::new(nodes, edges)?;
        *out = Box::into_raw(Box::new(PaynetGraph { inner: g }));
        Ok(())
    })
}

/// Releases a graph. Null is ignored.
///
/// # Safety
/// `g` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn paynet_graph_free(g: *mut PaynetGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Node count, 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn paynet_graph_node_count(g: *const PaynetGraph) -> usize {
    g.as_ref().map_or(0, |h| h.inner.n())
}

/// Edge count, 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn paynet_graph_edge_count(g: *const PaynetGraph) -> usize {
    g.as_ref().map_or(0, |h| h.inner.m())
}

/// Directed density `m / (n (n - 1))`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn paynet_density(n: usize, m: usize, out: *mut f64) -> PaynetStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = paynet::graph::density(n, m)?;
        Ok(())
    })
}

/// Modularity of a node-to-group assignment (`len` must equal the node count).
///
/// # Safety
/// `assignment` must point to `len` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn paynet_modularity(
    g: *const PaynetGraph,
    assignment: *const usize,
    len: usize,
    out: *mut f64,
) -> PaynetStatus {
    guard(|| {
        let g = graph_arg(g)?;
        let a = slice_arg(assignment, len, "assignment")?;
        check_len(len, g.n(), "assignment")?;
        let out = out_arg(out, "out")?;
        *out = modularity(g, a)?;
        Ok(())
    })
}

/// Louvain modules numbered from 1 by decreasing size, and their modularity.
///
/// # Safety
/// `assignment` must have room for `len` elements, `len` equal to the node
/// count; `q` must be writable.
#[no_mangle]
pub unsafe extern "C" fn paynet_louvain(
    g: *const PaynetGraph,
    seed: u64,
    assignment: *mut usize,
    len: usize,
    q: *mut f64,
) -> PaynetStatus {
    guard(|| {
        let g = graph_arg(g)?;
        check_len(len, g.n(), "assignment")?;
        let q = out_arg(q, "q")?;
        if assignment.is_null() && len > 0 {
            return Err(fail(PaynetStatus::NullPointer, "`assignment` is null"));
        }
        let p = louvain(g, seed)?;
        if len > 0 {
            std::slice::from_raw_parts_mut(assignment, len).copy_from_slice(&p.assignment);
        }
        *q = p.score;
        Ok(())
    })
}

/// Agony-minimizing ranks (1 = lowest), the agony and the hierarchy `h`.
/// `exact` selects the exhaustive solver, which accepts at most 16 nodes.
///
/// # Safety
/// `ranks` must have room for `len` elements, `len` equal to the node count;
/// `agony` and `h` must be writable.
#[no_mangle]
pub unsafe extern "C" fn paynet_agony(
    g: *const PaynetGraph,
    exact: bool,
    ranks: *mut usize,
    len: usize,
    agony: *mut u64,
    h: *mut f64,
) -> PaynetStatus {
    guard(|| {
        let g = graph_arg(g)?;
        check_len(len, g.n(), "ranks")?;
        let agony = out_arg(agony, "agony")?;
        let h = out_arg(h, "h")?;
        if ranks.is_null() && len > 0 {
            return Err(fail(PaynetStatus::NullPointer, "`ranks` is null"));
        }
        let p = minimize_agony(g, if exact { AgonyMode::ExactSmall } else { AgonyMode::Heuristic })?;
        if len > 0 {
            std::slice::from_raw_parts_mut(ranks, len).copy_from_slice(&p.assignment);
        }
        *agony = p.agony.unwrap_or(0);
        *h = p.score;
        Ok(())
    })
}

/// Rating assortativity over L, M, H and NA, by edge count or by volume.
///
/// # Safety
/// `r` must be writable.
#[no_mangle]
pub unsafe extern "C" fn paynet_rating_assortativity(g: *const PaynetGraph, weighted: bool, r: *mut f64) -> PaynetStatus {
    guard(|| {
        let g = graph_arg(g)?;
        let r = out_arg(r, "r")?;
        let mix = mixing_matrix(g, &rating_labels(g), 4, weighted)?;
        *r = assortativity(&mix)?.r;
        Ok(())
    })
}

/// Power-law tail fit by maximum likelihood with KS-selected `xmin`.
///
/// # Safety
/// `samples` must point to `len` values; `alpha` and `xmin` must be writable.
#[no_mangle]
pub unsafe extern "C" fn paynet_powerlaw_fit(
    samples: *const f64,
    len: usize,
    discrete: bool,
    alpha: *mut f64,
    xmin: *mut f64,
) -> PaynetStatus {
    guard(|| {
        let s = slice_arg(samples, len, "samples")?;
        let alpha = out_arg(alpha, "alpha")?;
        let xmin = out_arg(xmin, "xmin")?;
        let fit = powerlaw_fit(s, discrete)?;
        *alpha = fit.alpha;
        *xmin = fit.xmin;
        Ok(())
    })
}

/// Hypergeometric tail `P(X ≥ k)` (`upper`) or `P(X ≤ k)` for `n` draws from
/// a population of `big_n` holding `big_k` successes.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn paynet_hypergeom_tail(
    k: u64,
    n: u64,
    big_k: u64,
    big_n: u64,
    upper: bool,
    out: *mut f64,
) -> PaynetStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if big_k > big_n || n > big_n {
            return Err(fail(PaynetStatus::InvalidInput, "need big_k <= big_n and n <= big_n"));
        }
        *out = hypergeom_tail(k, n, big_k, big_n, upper);
        Ok(())
    })
}

/// Loads a `model.json` written by `paynet classify train`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn paynet_model_load(path: *const c_char, out: *mut *mut PaynetModel) -> PaynetStatus {
    guard(|| {
        let p = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let text = std::fs::read_to_string(p).map_err(|e| fail(PaynetStatus::Io, format!("{p}: {e}")))?;
        let a: Artifact<StoredModel> =
            serde_json::from_str(&text).map_err(|e| fail(PaynetStatus::Parse, format!("{p}: {e}")))?;
        *out = Box::into_raw(Box::new(PaynetModel { inner: a.data }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `m` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn paynet_model_free(m: *mut PaynetModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of predictors a model expects, 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn paynet_model_feature_count(m: *const PaynetModel) -> usize {
    m.as_ref().map_or(0, |h| h.inner.feature_names.len())
}

/// Predicts a rating (0 = L, 1 = M, 2 = H) from one preprocessed feature row.
///
/// # Safety
/// `features` must point to `len` values; `class` must be writable.
#[no_mangle]
pub unsafe extern "C" fn paynet_model_predict(
    m: *const PaynetModel,
    features: *const f64,
    len: usize,
    class: *mut i32,
) -> PaynetStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| fail(PaynetStatus::NullPointer, "model handle is null"))?;
        let x = slice_arg(features, len, "features")?;
        check_len(len, m.inner.feature_names.len(), "features")?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(fail(PaynetStatus::InvalidInput, "features must be finite"));
        }
        let class = out_arg(class, "class")?;
        *class = m.inner.model.predict(x).index() as i32;
        Ok(())
    })
}

/// Runs the command-line pipeline with `argv` (program name first) and
/// returns its exit status: 0 success, 2 config, 3 dependency, 4 data error.
///
/// # Safety
/// `argv` must point to `argc` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn paynet_run(argc: usize, argv: *const *const c_char) -> i32 {
    let mut args = Vec::with_capacity(argc);
    let status = guard(|| {
        for (i, &p) in slice_arg(argv, argc, "argv")?.iter().enumerate() {
            args.push(str_arg(p, &format!("argv[{i}]"))?.to_string());
        }
        Ok(())
    });
    if status != PaynetStatus::Ok {
        return 2;
    }
    catch_unwind(|| paynet::cli::run(args)).unwrap_or_else(|_| {
        set_error("internal panic");
        4
    })
}
