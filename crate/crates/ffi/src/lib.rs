// SPDX-License-Identifier: Apache-2.0

//! C ABI over the `userrec` library.
//!
//! Objects cross the boundary as opaque handles created by `ur_*_new` style
//! constructors and released with the matching `ur_*_free`. Every fallible
//! call returns a [`UrStatus`]; on failure the message is available from
//! [`ur_last_error_message`] on the same thread. Panics are caught and
//! reported as [`UrStatus::Panic`].
//!
//! Item ids are dense indices `0..n`. Output lists are written into caller
//! buffers; when a buffer is too small the call fails with
//! [`UrStatus::BufferTooSmall`] and stores the required length.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Mutex;

use userrec::eval::{recommend_with, Method, MethodParams};
use userrec::ingest::VectorTable;
use userrec::recover::{classical_mds, shortest_paths};
use userrec::{
    crawl, least_ratio, list_entropy, with_meter, AttributeTable, Error, FairnessParams, ItemId, ItemSet, Oracle,
    PprParams, PrivateRank, RecList, ScoreProvider, TableProvider, WalkParams,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A fairness or parameter bound was violated.
    Constraint = 3,
    /// Bad input data or a provider failure.
    Data = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UrMethod {
    Provider = 0,
    PrivateRank = 1,
    PrivateWalk = 2,
    Consul = 3,
    RandomFair = 4,
    OracleFair = 5,
}

impl From<UrMethod> for Method {
    fn from(m: UrMethod) -> Self {
        match m {
            UrMethod::Provider => Method::Provider,
            UrMethod::PrivateRank => Method::PrivateRank,
            UrMethod::PrivateWalk => Method::PrivateWalk,
            UrMethod::Consul => Method::Consul,
            UrMethod::RandomFair => Method::RandomFair,
            UrMethod::OracleFair => Method::OracleFair,
        }
    }
}

/// Knobs for [`ur_recommend`]; start from [`ur_params_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UrParams {
    /// Minimum items per group.
    pub tau: u32,
    /// PrivateRank damping factor.
    pub c: f64,
    /// PrivateRank power iterations.
    pub iterations: u32,
    /// PrivateWalk walk length.
    pub privatewalk_steps: u32,
    /// Consul page budget.
    pub consul_steps: u32,
    pub seed: u64,
}

enum Inner {
    Score(ScoreProvider),
    Table(TableProvider),
}

/// Opaque provider handle.
pub struct UrProvider {
    inner: Inner,
    privaterank: Mutex<Option<(PprParams, PrivateRank)>>,
}

impl UrProvider {
    fn new(inner: Inner) -> Self {
        UrProvider {
            inner,
            privaterank: Mutex::new(None),
        }
    }

    fn oracle(&self) -> &(dyn Oracle + Sync) {
        match &self.inner {
            Inner::Score(p) => p,
            Inner::Table(p) => p,
        }
    }
}

/// Opaque attribute table handle.
pub struct UrAttributes(AttributeTable);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: UrStatus, msg: impl Into<String>) -> UrStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> UrStatus {
    let status = match &e {
        Error::Constraint(_) => UrStatus::Constraint,
        Error::InvalidInput(_) | Error::DimensionMismatch { .. } => UrStatus::InvalidArgument,
        _ => UrStatus::Data,
    };
    fail(status, e.to_string())
}

/// Runs `f`, clearing the last error first and converting panics.
fn guard(f: impl FnOnce() -> UrStatus) -> UrStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(UrStatus::Panic, format!("panic: {msg}"))
        }
    }
}

macro_rules! try_ur {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return from_error(e),
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(UrStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

/// # Safety
/// `ptr` must point to `len` readable elements when `len > 0`.
unsafe fn slice<'a, T>(ptr: *const T, len: usize) -> &'a [T] {
    if len == 0 {
        &[]
    } else {
        std::slice::from_raw_parts(ptr, len)
    }
}

/// # Safety
/// When `cap > 0`, `out` must point to `cap` writable elements. `out_len`
/// must be valid for writes.
unsafe fn write_items(items: &[ItemId], out: *mut u32, cap: usize, out_len: *mut usize) -> UrStatus {
    *out_len = items.len();
    if items.len() > cap {
        return fail(
            UrStatus::BufferTooSmall,
            format!("need room for {} items, got {cap}", items.len()),
        );
    }
    if !items.is_empty() && out.is_null() {
        return fail(UrStatus::NullPointer, "out is null");
    }
    for (i, item) in items.iter().enumerate() {
        *out.add(i) = item.0;
    }
    UrStatus::Ok
}

fn vector_table(values: &[f64], n: usize, dim: usize) -> Result<VectorTable, Error> {
    if values.len() != n * dim {
        return Err(Error::DimensionMismatch {
            expected: n * dim,
            found: values.len(),
        });
    }
    VectorTable::from_rows(dim, values.to_vec())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ur_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ur_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Euclidean k-NN provider over `n * dim` row-major features.
///
/// # Safety
/// `features` must point to `n * dim` doubles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ur_provider_knn(
    features: *const f64,
    n: usize,
    dim: usize,
    k: usize,
    out: *mut *mut UrProvider,
) -> UrStatus {
    guard(|| {
        non_null!(features, out);
        let t = try_ur!(vector_table(slice(features, n * dim), n, dim));
        let p = try_ur!(ScoreProvider::knn(&t, k));
        *out = Box::into_raw(Box::new(UrProvider::new(Inner::Score(p))));
        UrStatus::Ok
    })
}

/// Inner-product provider over `n * dim` row-major embeddings.
///
/// # Safety
/// `embeddings` must point to `n * dim` doubles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ur_provider_dot(
    embeddings: *const f64,
    n: usize,
    dim: usize,
    k: usize,
    out: *mut *mut UrProvider,
) -> UrStatus {
    guard(|| {
        non_null!(embeddings, out);
        let t = try_ur!(vector_table(slice(embeddings, n * dim), n, dim));
        let p = try_ur!(ScoreProvider::dot(&t, k));
        *out = Box::into_raw(Box::new(UrProvider::new(Inner::Score(p))));
        UrStatus::Ok
    })
}

/// Provider from explicit lists: row `i` of the `n * k` array `lists` is the
/// page of item `i`, padded with `UINT32_MAX` when shorter than `k`.
///
/// # Safety
/// `lists` must point to `n * k` values; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ur_provider_table(
    lists: *const u32,
    n: usize,
    k: usize,
    out: *mut *mut UrProvider,
) -> UrStatus {
    guard(|| {
        non_null!(lists, out);
        let flat = slice(lists, n * k);
        let rows = (0..n)
            .map(|i| {
                flat[i * k..(i + 1) * k]
                    .iter()
                    .take_while(|&&x| x != u32::MAX)
                    .map(|&x| ItemId(x))
                    .collect()
            })
            .collect();
        let p = try_ur!(TableProvider::new(k, rows));
        *out = Box::into_raw(Box::new(UrProvider::new(Inner::Table(p))));
        UrStatus::Ok
    })
}

/// # Safety
/// `provider` must come from a `ur_provider_*` constructor and not be used
/// afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ur_provider_free(provider: *mut UrProvider) {
    if !provider.is_null() {
        drop(Box::from_raw(provider));
    }
}

/// # Safety
/// `provider` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ur_provider_n_items(provider: *const UrProvider) -> usize {
    provider.as_ref().map_or(0, |p| p.oracle().n_items())
}

/// # Safety
/// `provider` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ur_provider_k(provider: *const UrProvider) -> usize {
    provider.as_ref().map_or(0, |p| p.oracle().k())
}

/// The provider's own list for `source`.
///
/// # Safety
/// `provider` must be a live handle, `out` must hold `cap` values and
/// `out_len` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ur_provider_query(
    provider: *const UrProvider,
    source: u32,
    out: *mut u32,
    cap: usize,
    out_len: *mut usize,
) -> UrStatus {
    guard(|| {
        non_null!(provider, out_len);
        let list = try_ur!((*provider).oracle().query(ItemId(source)));
        write_items(list.as_slice(), out, cap, out_len)
    })
}

/// Attribute table from one group index per item, each below `n_groups`.
///
/// # Safety
/// `groups` must point to `n` values; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ur_attributes_new(
    groups: *const u16,
    n: usize,
    n_groups: usize,
    out: *mut *mut UrAttributes,
) -> UrStatus {
    guard(|| {
        non_null!(groups, out);
        let t = try_ur!(AttributeTable::from_indices(slice(groups, n), n_groups));
        *out = Box::into_raw(Box::new(UrAttributes(t)));
        UrStatus::Ok
    })
}

/// # Safety
/// `attrs` must come from [`ur_attributes_new`] and not be used afterwards.
/// NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ur_attributes_free(attrs: *mut UrAttributes) {
    if !attrs.is_null() {
        drop(Box::from_raw(attrs));
    }
}

/// Defaults: `tau = 0`, `c = 0.01`, 10 iterations, PrivateWalk length 100,
/// Consul budget 10, seed 0.
#[no_mangle]
pub extern "C" fn ur_params_default() -> UrParams {
    UrParams {
        tau: 0,
        c: PprParams::DEFAULT_C,
        iterations: PprParams::DEFAULT_ITERATIONS as u32,
        privatewalk_steps: WalkParams::PRIVATEWALK_DEFAULT_STEPS as u32,
        consul_steps: WalkParams::CONSUL_DEFAULT_STEPS as u32,
        seed: 0,
    }
}

/// Fair list for `source` written to `out`.
///
/// `out_accesses` (optional) receives the number of distinct provider pages
/// the method needed; for PrivateRank that is the whole crawl, and for
/// oracle_fair it is 0 since it reads scores directly. PrivateRank crawls
/// once per handle and damping setting and reuses the network.
///
/// # Safety
/// Handles must be live; `history` must hold `history_len` values; `out`
/// must hold `cap` values; `out_len` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ur_recommend(
    provider: *const UrProvider,
    attrs: *const UrAttributes,
    method: UrMethod,
    source: u32,
    params: *const UrParams,
    history: *const u32,
    history_len: usize,
    out: *mut u32,
    cap: usize,
    out_len: *mut usize,
    out_accesses: *mut u64,
) -> UrStatus {
    guard(|| {
        non_null!(provider, attrs, params, out_len);
        if history_len > 0 && history.is_null() {
            return fail(UrStatus::NullPointer, "history is null");
        }
        let (p, a, prm) = (&*provider, &(*attrs).0, *params);
        let oracle = p.oracle();
        let fp = try_ur!(FairnessParams::new(oracle.k(), prm.tau as usize, a));
        let mp = MethodParams {
            ppr: try_ur!(PprParams::new(prm.c, prm.iterations as usize)),
            privatewalk_steps: prm.privatewalk_steps as usize,
            consul_steps: prm.consul_steps as usize,
        };
        let hist: ItemSet = slice(history, history_len).iter().map(|&h| ItemId(h)).collect();
        let method = Method::from(method);
        let scores = match &p.inner {
            Inner::Score(s) => Some(s),
            Inner::Table(_) => None,
        };
        let mut cache = p.privaterank.lock().unwrap_or_else(|e| e.into_inner());
        if method == Method::PrivateRank && cache.as_ref().is_none_or(|(pp, _)| *pp != mp.ppr) {
            *cache = Some((mp.ppr, try_ur!(PrivateRank::crawl(oracle, mp.ppr))));
        }
        let pr = cache.as_ref().map(|(_, r)| r);
        let (metered, meter) = with_meter(oracle);
        let rec = try_ur!(recommend_with(
            method, &metered, scores, pr, ItemId(source), a, fp, &mp, prm.seed, &hist
        ));
        if !out_accesses.is_null() {
            *out_accesses = match method {
                Method::PrivateRank => oracle.n_items() as u64,
                _ => meter.distinct(),
            };
        }
        write_items(rec.list.as_slice(), out, cap, out_len)
    })
}

fn rec_list(items: &[u32], attrs: &AttributeTable) -> Result<RecList, Error> {
    if let Some(bad) = items.iter().find(|&&i| i as usize >= attrs.n_items()) {
        return Err(Error::InvalidInput(format!("item {bad} outside the attribute table")));
    }
    RecList::new(items.iter().map(|&i| ItemId(i)).collect())
}

/// Smallest group share in the list.
///
/// # Safety
/// `attrs` must be live; `items` must hold `len` values; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn ur_least_ratio(
    attrs: *const UrAttributes,
    items: *const u32,
    len: usize,
    out: *mut f64,
) -> UrStatus {
    guard(|| {
        non_null!(attrs, items, out);
        let a = &(*attrs).0;
        let list = try_ur!(rec_list(slice(items, len), a));
        *out = try_ur!(least_ratio(&list, a)).as_f64();
        UrStatus::Ok
    })
}

/// Base-2 entropy of the group shares in the list.
///
/// # Safety
/// Same contract as [`ur_least_ratio`].
#[no_mangle]
pub unsafe extern "C" fn ur_entropy(
    attrs: *const UrAttributes,
    items: *const u32,
    len: usize,
    out: *mut f64,
) -> UrStatus {
    guard(|| {
        non_null!(attrs, items, out);
        let a = &(*attrs).0;
        let list = try_ur!(rec_list(slice(items, len), a));
        *out = try_ur!(list_entropy(&list, a));
        UrStatus::Ok
    })
}

/// Recovers `dim`-dimensional coordinates from the provider's k-NN graph
/// (crawl, symmetrized hop distances, classical MDS), written row-major to
/// `out`, which must hold `n * dim` doubles.
///
/// # Safety
/// `provider` must be live; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn ur_recover(
    provider: *const UrProvider,
    dim: usize,
    out: *mut f64,
    cap: usize,
) -> UrStatus {
    guard(|| {
        non_null!(provider, out);
        let oracle = (*provider).oracle();
        let need = oracle.n_items() * dim;
        if cap < need {
            return fail(UrStatus::BufferTooSmall, format!("need room for {need} values, got {cap}"));
        }
        let net = try_ur!(crawl(oracle));
        let mds = try_ur!(classical_mds(&shortest_paths(&net, true).distances, dim));
        ptr::copy_nonoverlapping(mds.embedding.coords().as_ptr(), out, need);
        UrStatus::Ok
    })
}
