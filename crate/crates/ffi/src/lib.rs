//! C ABI over the rwnsgcn core.
//!
//! Graphs and datasets cross the boundary as opaque handles that must be
//! released with the matching `*_free` function. Every fallible function
//! returns an [`RwStatus`]; on failure a description is available from
//! [`rw_last_error_message`] until the next call on the same thread.
//! Panics never unwind into the caller and are reported as
//! [`RwStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use rwnsgcn::attacks::{ctbca_remove, twpa_perturb};
use rwnsgcn::datasets::{load_json_bundle, Dataset};
use rwnsgcn::walk::{
    bfs_layers, combined_scores, pagerank_scores, rwr_scores, select_candidates, PageRankMode,
    RandomWalk,
};
use rwnsgcn::{metrics, Error, Graph};

/// Result codes shared by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotConverged = 4,
    Io = 5,
    Parse = 6,
    BufferTooSmall = 7,
    Internal = 99,
}

/// Opaque graph handle.
pub struct RwGraph(Graph);

/// Opaque dataset handle.
pub struct RwDataset(Dataset);

const TOL: f64 = 1e-10;
const MAX_ITER: usize = 10_000;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> RwStatus {
    match err {
        Error::NodeOutOfRange { .. } | Error::InvalidWeight { .. } | Error::InvalidParameter(_) => {
            RwStatus::InvalidArgument
        }
        Error::EmptyMask | Error::InsufficientClass { .. } => RwStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => RwStatus::DimensionMismatch,
        Error::NotConverged { .. } | Error::Diverged { .. } => RwStatus::NotConverged,
        Error::Io { .. } => RwStatus::Io,
        Error::Parse { .. } | Error::Schema { .. } | Error::Json(_) | Error::Csv(_) => RwStatus::Parse,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (RwStatus, String)>) -> RwStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RwStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RwStatus::Internal
        }
    }
}

fn core(err: Error) -> (RwStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (RwStatus, String) {
    (RwStatus::NullPointer, format!("{what} is null"))
}

unsafe fn graph_ref<'a>(g: *const RwGraph) -> Result<&'a Graph, (RwStatus, String)> {
    g.as_ref().map(|h| &h.0).ok_or_else(|| null("graph"))
}

unsafe fn out_slice<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], (RwStatus, String)> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn in_slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], (RwStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn rw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds an undirected graph from `m` edges `(us[i], vs[i])`. `ws` may be
/// NULL for unit weights.
///
/// # Safety
/// `us` and `vs` (and `ws` unless NULL) must point to `m` readable values;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_graph_new(
    num_nodes: usize,
    us: *const usize,
    vs: *const usize,
    ws: *const f64,
    m: usize,
    out: *mut *mut RwGraph,
) -> RwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let us = in_slice(us, m, "us")?;
        let vs = in_slice(vs, m, "vs")?;
        let ws = if ws.is_null() { None } else { Some(in_slice(ws, m, "ws")?) };
        let list: Vec<(usize, usize, f64)> = (0..m)
            .map(|i| (us[i], vs[i], ws.map_or(1.0, |w| w[i])))
            .collect();
        let g = Graph::build(num_nodes, &list).map_err(core)?;
        *out = Box::into_raw(Box::new(RwGraph(g)));
        Ok(())
    })
}

/// Releases a graph; NULL is ignored.
///
/// # Safety
/// `g` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rw_graph_free(g: *mut RwGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_graph_size(
    g: *const RwGraph,
    num_nodes: *mut usize,
    num_edges: *mut usize,
) -> RwStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if num_nodes.is_null() || num_edges.is_null() {
            return Err(null("out"));
        }
        *num_nodes = g.num_nodes();
        *num_edges = g.num_edges();
        Ok(())
    })
}

/// Copies the edge list (`u < v`, lexicographic) into caller buffers of
/// capacity `cap`. `out_len` receives the edge count even when the buffers
/// are too small.
///
/// # Safety
/// Buffers must hold `cap` writable values; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_graph_edges(
    g: *const RwGraph,
    us: *mut usize,
    vs: *mut usize,
    ws: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> RwStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if out_len.is_null() {
            return Err(null("out_len"));
        }
        let edges = g.edges();
        *out_len = edges.len();
        if edges.len() > cap {
            return Err((RwStatus::BufferTooSmall, format!("need {} slots", edges.len())));
        }
        let (us, vs, ws) = (
            out_slice(us, edges.len(), "us")?,
            out_slice(vs, edges.len(), "vs")?,
            out_slice(ws, edges.len(), "ws")?,
        );
        for (i, e) in edges.iter().enumerate() {
            us[i] = e.u;
            vs[i] = e.v;
            ws[i] = e.weight;
        }
        Ok(())
    })
}

/// Random walk with restart from `source`; writes `num_nodes` scores.
///
/// # Safety
/// `out` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rw_rwr_scores(
    g: *const RwGraph,
    source: usize,
    alpha: f64,
    out: *mut f64,
    len: usize,
) -> RwStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if len != g.num_nodes() {
            return Err(core(Error::DimensionMismatch { expected: g.num_nodes(), actual: len }));
        }
        let s = rwr_scores(&RandomWalk::new(g), source, alpha, TOL, MAX_ITER).map_err(core)?;
        out_slice(out, len, "out")?.copy_from_slice(&s.values);
        Ok(())
    })
}

/// Converged PageRank; writes `num_nodes` scores.
///
/// # Safety
/// `out` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rw_pagerank_scores(
    g: *const RwGraph,
    alpha: f64,
    out: *mut f64,
    len: usize,
) -> RwStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if len != g.num_nodes() {
            return Err(core(Error::DimensionMismatch { expected: g.num_nodes(), actual: len }));
        }
        let s = pagerank_scores(&RandomWalk::new(g), alpha, PageRankMode::Converged, TOL, MAX_ITER)
            .map_err(core)?;
        out_slice(out, len, "out")?.copy_from_slice(&s.values);
        Ok(())
    })
}

/// Negative-sample candidates for `source`: the `k_per_level` best
/// combined scorers in each hop layer `2..l_max`. Writes up to `cap` node
/// ids; `out_len` receives the candidate count.
///
/// # Safety
/// `out` must hold `cap` writable values; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_select_candidates(
    g: *const RwGraph,
    source: usize,
    alpha: f64,
    beta: f64,
    l_max: usize,
    k_per_level: usize,
    out: *mut usize,
    cap: usize,
    out_len: *mut usize,
) -> RwStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if out_len.is_null() {
            return Err(null("out_len"));
        }
        if !(0.0..=1.0).contains(&beta) || l_max < 2 || k_per_level == 0 {
            return Err(core(Error::InvalidParameter(
                "need beta in [0, 1], l_max >= 2 and k_per_level >= 1".into(),
            )));
        }
        let walk = RandomWalk::new(g);
        let rwr = rwr_scores(&walk, source, alpha, TOL, MAX_ITER).map_err(core)?;
        let pgr = pagerank_scores(&walk, alpha, PageRankMode::Converged, TOL, MAX_ITER).map_err(core)?;
        let scores = combined_scores(&rwr, &pgr, beta).map_err(core)?;
        let layers = bfs_layers(g, source, l_max).map_err(core)?;
        let levels: Vec<usize> = (2..l_max).collect();
        let nodes = select_candidates(&layers, &scores, &levels, k_per_level).nodes();
        *out_len = nodes.len();
        if nodes.len() > cap {
            return Err((RwStatus::BufferTooSmall, format!("need {} slots", nodes.len())));
        }
        out_slice(out, nodes.len(), "out")?.copy_from_slice(&nodes);
        Ok(())
    })
}

/// Removes the `⌈fraction·|E|⌉` highest-betweenness edges into a new graph.
///
/// # Safety
/// `g` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_ctbca_remove(
    g: *const RwGraph,
    fraction: f64,
    seed: u64,
    out: *mut *mut RwGraph,
) -> RwStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let h = ctbca_remove(g, fraction, seed).map_err(core)?;
        *out = Box::into_raw(Box::new(RwGraph(h)));
        Ok(())
    })
}

/// Adds clamped Gaussian noise of scale `sigma` to every edge weight.
///
/// # Safety
/// `g` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_twpa_perturb(
    g: *const RwGraph,
    sigma: f64,
    seed: u64,
    out: *mut *mut RwGraph,
) -> RwStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let h = twpa_perturb(g, sigma, seed).map_err(core)?;
        *out = Box::into_raw(Box::new(RwGraph(h)));
        Ok(())
    })
}

/// Fraction of `mask` entries whose prediction equals the label.
///
/// # Safety
/// `preds`/`labels` must hold `n` values, `mask` `mask_len`; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rw_accuracy(
    preds: *const usize,
    labels: *const usize,
    n: usize,
    mask: *const usize,
    mask_len: usize,
    out: *mut f64,
) -> RwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let preds = in_slice(preds, n, "preds")?;
        let labels = in_slice(labels, n, "labels")?;
        let mask = in_slice(mask, mask_len, "mask")?;
        if let Some(&bad) = mask.iter().find(|&&i| i >= n) {
            return Err(core(Error::InvalidParameter(format!("mask index {bad} >= {n}"))));
        }
        *out = metrics::accuracy(preds, labels, mask).map_err(core)?;
        Ok(())
    })
}

/// Mean average cosine distance (×100) of a row-major `rows × cols` matrix.
///
/// # Safety
/// `data` must hold `rows * cols` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_mad(data: *const f64, rows: usize, cols: usize, out: *mut f64) -> RwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| core(Error::InvalidParameter("rows * cols overflows".into())))?;
        let values = in_slice(data, len, "data")?;
        let view = ndarray::ArrayView2::from_shape((rows, cols), values)
            .map_err(|e| core(Error::InvalidParameter(e.to_string())))?;
        *out = metrics::mad(view).map_err(core)?.value;
        Ok(())
    })
}

/// Loads a JSON dataset bundle.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_dataset_load_json(path: *const c_char, out: *mut *mut RwDataset) -> RwStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return Err(null("path or out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| core(Error::InvalidParameter("path is not UTF-8".into())))?;
        let ds = load_json_bundle(Path::new(path)).map_err(core)?;
        *out = Box::into_raw(Box::new(RwDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `ds` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rw_dataset_free(ds: *mut RwDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// # Safety
/// `ds` must be live; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_dataset_shape(
    ds: *const RwDataset,
    num_nodes: *mut usize,
    num_features: *mut usize,
    num_classes: *mut usize,
) -> RwStatus {
    guard(|| {
        let ds = &ds.as_ref().ok_or_else(|| null("dataset"))?.0;
        if num_nodes.is_null() || num_features.is_null() || num_classes.is_null() {
            return Err(null("out"));
        }
        *num_nodes = ds.num_nodes();
        *num_features = ds.feature_dim();
        *num_classes = ds.class_count();
        Ok(())
    })
}

/// Copies the dataset's graph into a new, independently owned handle.
///
/// # Safety
/// `ds` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rw_dataset_graph(ds: *const RwDataset, out: *mut *mut RwGraph) -> RwStatus {
    guard(|| {
        let ds = &ds.as_ref().ok_or_else(|| null("dataset"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(RwGraph(ds.graph.clone())));
        Ok(())
    })
}
