// SPDX-License-Identifier: Apache-2.0

//! Simulated black-box providers and the access meter.
//!
//! A provider answers one question: given the page of a source item, which
//! `K` items does it recommend? Everything downstream sees providers only
//! through [`Oracle`], so the same algorithms run against score-based
//! simulators, fixed list tables, or a metered wrapper around either.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::fairness::{ItemId, ItemSet, RecList};
use crate::ingest::{InteractionLog, VectorTable};

/// Query access to a provider's item-to-item recommendations.
pub trait Oracle {
    /// Nominal list length.
    fn k(&self) -> usize;

    /// Size of the item universe; valid sources are `0..n_items()`.
    fn n_items(&self) -> usize;

    /// Recommendations shown on the page of `source`.
    fn query(&self, source: ItemId) -> Result<RecList>;

    /// Recommendations with `exclude` filtered out. Providers that can rank
    /// deeper refill the list to `K`; the default only filters.
    fn query_excluding(&self, source: ItemId, exclude: &ItemSet) -> Result<RecList> {
        let list = self.query(source)?;
        RecList::new(list.iter().filter(|i| !exclude.contains(i)).collect())
    }
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn k(&self) -> usize {
        (**self).k()
    }
    fn n_items(&self) -> usize {
        (**self).n_items()
    }
    fn query(&self, source: ItemId) -> Result<RecList> {
        (**self).query(source)
    }
    fn query_excluding(&self, source: ItemId, exclude: &ItemSet) -> Result<RecList> {
        (**self).query_excluding(source, exclude)
    }
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn k(&self) -> usize {
        (**self).k()
    }
    fn n_items(&self) -> usize {
        (**self).n_items()
    }
    fn query(&self, source: ItemId) -> Result<RecList> {
        (**self).query(source)
    }
    fn query_excluding(&self, source: ItemId, exclude: &ItemSet) -> Result<RecList> {
        (**self).query_excluding(source, exclude)
    }
}

impl<O: Oracle + ?Sized> Oracle for Arc<O> {
    fn k(&self) -> usize {
        (**self).k()
    }
    fn n_items(&self) -> usize {
        (**self).n_items()
    }
    fn query(&self, source: ItemId) -> Result<RecList> {
        (**self).query(source)
    }
    fn query_excluding(&self, source: ItemId, exclude: &ItemSet) -> Result<RecList> {
        (**self).query_excluding(source, exclude)
    }
}

fn check_source(source: ItemId, n: usize) -> Result<()> {
    if source.index() >= n {
        return Err(Error::Provider {
            item: source,
            message: format!("outside the universe of {n} items"),
        });
    }
    Ok(())
}

#[derive(Clone, Debug)]
enum Scorer {
    /// Negative Euclidean distance over standardized features.
    Euclidean { dim: usize, values: Vec<f64> },
    /// Cosine similarity between binary interaction-matrix columns.
    Cosine {
        item_users: Vec<Vec<u32>>,
        user_items: Vec<Vec<u32>>,
    },
    Dot { dim: usize, values: Vec<f64> },
}

/// Provider that ranks every other item by a similarity score.
///
/// Higher scores rank first; equal scores rank by ascending [`ItemId`].
#[derive(Clone, Debug)]
pub struct ScoreProvider {
    k: usize,
    n: usize,
    scorer: Scorer,
}

impl ScoreProvider {
    fn new(k: usize, n: usize, scorer: Scorer) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("K must be positive".into()));
        }
        if n < k + 1 {
            return Err(Error::InvalidInput(format!(
                "provider needs at least K + 1 = {} items, got {n}",
                k + 1
            )));
        }
        Ok(ScoreProvider { k, n, scorer })
    }

    /// Euclidean k-NN over features standardized to zero mean and unit
    /// variance per dimension; constant dimensions are dropped.
    pub fn knn(features: &VectorTable, k: usize) -> Result<Self> {
        let (n, dim) = (features.n_items(), features.dim());
        let raw = features.values();
        let mut keep = Vec::new();
        for j in 0..dim {
            let mean = (0..n).map(|i| raw[i * dim + j]).sum::<f64>() / n as f64;
            let var = (0..n).map(|i| (raw[i * dim + j] - mean).powi(2)).sum::<f64>() / n as f64;
            if var > 0.0 {
                keep.push((j, mean, var.sqrt()));
            }
        }
        let mut values = Vec::with_capacity(n * keep.len());
        for i in 0..n {
            for &(j, mean, sd) in &keep {
                values.push((raw[i * dim + j] - mean) / sd);
            }
        }
        ScoreProvider::new(
            k,
            n,
            Scorer::Euclidean {
                dim: keep.len(),
                values,
            },
        )
    }

    /// Item-item cosine over the binary user-item matrix. Items nobody
    /// interacted with score `-inf` and so rank after orthogonal items.
    pub fn cosine(log: &InteractionLog, k: usize) -> Result<Self> {
        let mut item_users = vec![Vec::new(); log.n_items()];
        let mut user_items = vec![Vec::new(); log.n_users()];
        for r in log.rows() {
            item_users[r.item.index()].push(r.user);
            user_items[r.user as usize].push(r.item.0);
        }
        ScoreProvider::new(
            k,
            log.n_items(),
            Scorer::Cosine {
                item_users,
                user_items,
            },
        )
    }

    /// Inner product of item embeddings.
    pub fn dot(embeddings: &VectorTable, k: usize) -> Result<Self> {
        ScoreProvider::new(
            k,
            embeddings.n_items(),
            Scorer::Dot {
                dim: embeddings.dim(),
                values: embeddings.values().to_vec(),
            },
        )
    }

    /// Score of every item against `source` (the source's own entry included).
    pub fn scores(&self, source: ItemId) -> Result<Vec<f64>> {
        let mut v = self.raw_scores(source)?;
        // -0.0 must tie with 0.0 under total_cmp
        v.iter_mut().for_each(|x| *x += 0.0);
        Ok(v)
    }

    fn raw_scores(&self, source: ItemId) -> Result<Vec<f64>> {
        check_source(source, self.n)?;
        let s = source.index();
        Ok(match &self.scorer {
            Scorer::Euclidean { dim: 0, .. } => vec![0.0; self.n],
            Scorer::Euclidean { dim, values } => {
                let x = &values[s * dim..(s + 1) * dim];
                values
                    .chunks_exact(*dim)
                    .map(|y| {
                        -x.iter()
                            .zip(y)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect()
            }
            Scorer::Dot { dim, values } => {
                let x = &values[s * dim..(s + 1) * dim];
                values
                    .chunks_exact(*dim)
                    .map(|y| x.iter().zip(y).map(|(a, b)| a * b).sum())
                    .collect()
            }
            Scorer::Cosine {
                item_users,
                user_items,
            } => {
                let mut overlap = vec![0u32; self.n];
                for &u in &item_users[s] {
                    for &j in &user_items[u as usize] {
                        overlap[j as usize] += 1;
                    }
                }
                let ns = item_users[s].len() as f64;
                (0..self.n)
                    .map(|j| {
                        let nj = item_users[j].len() as f64;
                        if ns == 0.0 || nj == 0.0 {
                            f64::NEG_INFINITY
                        } else {
                            overlap[j] as f64 / (ns * nj).sqrt()
                        }
                    })
                    .collect()
            }
        })
    }

    /// Top `limit` items for `source`, skipping the source and `exclude`.
    pub fn ranked(&self, source: ItemId, exclude: &ItemSet, limit: usize) -> Result<Vec<ItemId>> {
        let scores = self.scores(source)?;
        let mut cand: Vec<ItemId> = (0..self.n)
            .map(ItemId::new)
            .filter(|&j| j != source && !exclude.contains(&j))
            .collect();
        let by_score = |a: &ItemId, b: &ItemId| {
            scores[b.index()]
                .total_cmp(&scores[a.index()])
                .then(a.cmp(b))
        };
        if limit < cand.len() {
            cand.select_nth_unstable_by(limit, by_score);
            cand.truncate(limit);
        }
        cand.sort_unstable_by(by_score);
        Ok(cand)
    }

    /// View of this provider that never recommends items in `history`.
    pub fn with_history<'a>(&'a self, history: &'a ItemSet) -> WithHistory<'a, Self> {
        WithHistory {
            inner: self,
            history,
        }
    }
}

impl Oracle for ScoreProvider {
    fn k(&self) -> usize {
        self.k
    }

    fn n_items(&self) -> usize {
        self.n
    }

    fn query(&self, source: ItemId) -> Result<RecList> {
        self.query_excluding(source, &ItemSet::new())
    }

    fn query_excluding(&self, source: ItemId, exclude: &ItemSet) -> Result<RecList> {
        RecList::new(self.ranked(source, exclude, self.k)?)
    }
}

/// Provider personalized by a fixed interaction history.
#[derive(Clone, Copy)]
pub struct WithHistory<'a, O: ?Sized> {
    inner: &'a O,
    history: &'a ItemSet,
}

impl<'a, O: Oracle + ?Sized> WithHistory<'a, O> {
    pub fn new(inner: &'a O, history: &'a ItemSet) -> Self {
        WithHistory { inner, history }
    }
}

impl<O: Oracle + ?Sized> Oracle for WithHistory<'_, O> {
    fn k(&self) -> usize {
        self.inner.k()
    }

    fn n_items(&self) -> usize {
        self.inner.n_items()
    }

    fn query(&self, source: ItemId) -> Result<RecList> {
        self.inner.query_excluding(source, self.history)
    }
}

/// Provider backed by explicit per-item lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableProvider {
    k: usize,
    lists: Vec<RecList>,
}

impl TableProvider {
    /// `lists[i]` is the page of item `i`. Lists must not contain their own
    /// source, must reference items in range and hold at most `k` entries.
    pub fn new(k: usize, lists: Vec<Vec<ItemId>>) -> Result<Self> {
        let n = lists.len();
        let lists = lists
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                if l.len() > k {
                    return Err(Error::InvalidInput(format!(
                        "list of item {i} has {} entries, more than K = {k}",
                        l.len()
                    )));
                }
                if let Some(bad) = l.iter().find(|j| j.index() >= n || j.index() == i) {
                    return Err(Error::InvalidInput(format!(
                        "list of item {i} contains invalid entry {bad}"
                    )));
                }
                RecList::new(l)
            })
            .collect::<Result<_>>()?;
        Ok(TableProvider { k, lists })
    }

    /// Materializes every list of `oracle` (one query per item).
    pub fn snapshot<O: Oracle + ?Sized>(oracle: &O) -> Result<Self> {
        let lists = (0..oracle.n_items())
            .map(|i| oracle.query(ItemId::new(i)).map(RecList::into_vec))
            .collect::<Result<_>>()?;
        TableProvider::new(oracle.k(), lists)
    }

    pub fn lists(&self) -> &[RecList] {
        &self.lists
    }
}

impl Oracle for TableProvider {
    fn k(&self) -> usize {
        self.k
    }

    fn n_items(&self) -> usize {
        self.lists.len()
    }

    fn query(&self, source: ItemId) -> Result<RecList> {
        check_source(source, self.lists.len())?;
        Ok(self.lists[source.index()].clone())
    }
}

/// Lazily computed, shared cache of a provider's history-free lists.
///
/// Purely a simulation speed-up: the wrapped provider is deterministic, so
/// caching does not change any answer. Wrap a [`Metered`] around it to count
/// accesses.
pub struct Cached<O> {
    inner: O,
    lists: Vec<OnceLock<RecList>>,
}

impl<O: Oracle> Cached<O> {
    pub fn new(inner: O) -> Self {
        let n = inner.n_items();
        Cached {
            inner,
            lists: (0..n).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: Oracle> Oracle for Cached<O> {
    fn k(&self) -> usize {
        self.inner.k()
    }

    fn n_items(&self) -> usize {
        self.inner.n_items()
    }

    fn query(&self, source: ItemId) -> Result<RecList> {
        check_source(source, self.lists.len())?;
        if let Some(l) = self.lists[source.index()].get() {
            return Ok(l.clone());
        }
        let l = self.inner.query(source)?;
        Ok(self.lists[source.index()].get_or_init(|| l).clone())
    }

    fn query_excluding(&self, source: ItemId, exclude: &ItemSet) -> Result<RecList> {
        if exclude.is_empty() {
            self.query(source)
        } else {
            self.inner.query_excluding(source, exclude)
        }
    }
}

#[derive(Debug, Default)]
struct Counters {
    total: AtomicU64,
    distinct: AtomicU64,
}

/// Shared handle on the counters of a [`Metered`] oracle.
#[derive(Clone, Debug, Default)]
pub struct AccessMeter(Arc<Counters>);

impl AccessMeter {
    /// Every call to `query`, cached or not.
    pub fn total(&self) -> u64 {
        self.0.total.load(Ordering::SeqCst)
    }

    /// Number of distinct item pages fetched from the underlying provider.
    pub fn distinct(&self) -> u64 {
        self.0.distinct.load(Ordering::SeqCst)
    }
}

/// Oracle wrapper that counts page accesses.
///
/// Pages are memoized: repeated queries for the same source are answered
/// from the cache, so the distinct count equals the number of unique sources.
pub struct Metered<O> {
    inner: O,
    cache: Mutex<HashMap<ItemId, RecList>>,
    meter: AccessMeter,
}

/// Wraps `oracle` in a meter and returns it with a handle on its counters.
pub fn with_meter<O: Oracle>(oracle: O) -> (Metered<O>, AccessMeter) {
    let meter = AccessMeter::default();
    (
        Metered {
            inner: oracle,
            cache: Mutex::new(HashMap::new()),
            meter: meter.clone(),
        },
        meter,
    )
}

impl<O: Oracle> Metered<O> {
    pub fn meter(&self) -> &AccessMeter {
        &self.meter
    }

    /// Clears the page cache and zeroes both counters.
    pub fn reset(&self) {
        let mut cache = self.cache.lock().expect("meter cache poisoned");
        cache.clear();
        self.meter.0.total.store(0, Ordering::SeqCst);
        self.meter.0.distinct.store(0, Ordering::SeqCst);
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: Oracle> Oracle for Metered<O> {
    fn k(&self) -> usize {
        self.inner.k()
    }

    fn n_items(&self) -> usize {
        self.inner.n_items()
    }

    fn query(&self, source: ItemId) -> Result<RecList> {
        // The lock is held across the underlying call so counts stay exact
        // under concurrent queries.
        let mut cache = self.cache.lock().expect("meter cache poisoned");
        self.meter.0.total.fetch_add(1, Ordering::SeqCst);
        if let Some(l) = cache.get(&source) {
            return Ok(l.clone());
        }
        let l = self.inner.query(source)?;
        self.meter.0.distinct.fetch_add(1, Ordering::SeqCst);
        cache.insert(source, l.clone());
        Ok(l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<ItemId> {
        v.iter().map(|&i| ItemId(i)).collect()
    }

    #[test]
    fn knn_one_dimensional() {
        let f = VectorTable::from_rows(1, vec![0.0, 1.0, 2.0, 10.0]).unwrap();
        let p = ScoreProvider::knn(&f, 2).unwrap();
        assert_eq!(p.query(ItemId(0)).unwrap().into_vec(), ids(&[1, 2]));
        assert_eq!(p.query(ItemId(3)).unwrap().into_vec(), ids(&[2, 1]));
    }

    #[test]
    fn knn_drops_constant_dimensions() {
        let f = VectorTable::from_rows(2, vec![0.0, 5.0, 1.0, 5.0, 3.0, 5.0]).unwrap();
        let p = ScoreProvider::knn(&f, 1).unwrap();
        assert_eq!(p.query(ItemId(2)).unwrap().into_vec(), ids(&[1]));
    }

    #[test]
    fn knn_requires_k_plus_one_items() {
        let f = VectorTable::from_rows(1, vec![0.0, 1.0]).unwrap();
        assert!(ScoreProvider::knn(&f, 2).is_err());
    }

    #[test]
    fn cosine_identical_and_orthogonal_columns() {
        // items 0 and 1 share users {0,1}; items 2 and 3 are orthogonal to both
        let rows = vec![
            (0, 0, None),
            (1, 0, None),
            (0, 1, None),
            (1, 1, None),
            (2, 2, None),
            (3, 3, None),
        ];
        let log = InteractionLog::from_rows(rows).unwrap();
        let p = ScoreProvider::cosine(&log, 3).unwrap();
        let s = p.scores(ItemId(0)).unwrap();
        assert!((s[1] - 1.0).abs() < 1e-15);
        assert_eq!(s[2], 0.0);
        assert_eq!(p.query(ItemId(0)).unwrap().into_vec(), ids(&[1, 2, 3]));
    }

    #[test]
    fn dot_order_and_ties() {
        let e = VectorTable::from_rows(2, vec![1.0, 0.0, 2.0, 0.0, 0.0, 3.0, -1.0, 0.0]).unwrap();
        let p = ScoreProvider::dot(&e, 3).unwrap();
        assert_eq!(p.query(ItemId(0)).unwrap().into_vec(), ids(&[1, 2, 3]));
        let z = VectorTable::from_rows(2, vec![0.0; 8]).unwrap();
        let p = ScoreProvider::dot(&z, 3).unwrap();
        assert_eq!(p.query(ItemId(2)).unwrap().into_vec(), ids(&[0, 1, 3]));
    }

    #[test]
    fn history_refills_from_deeper_ranks() {
        let f = VectorTable::from_rows(1, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = ScoreProvider::knn(&f, 2).unwrap();
        let h: ItemSet = [ItemId(1)].into_iter().collect();
        let view = p.with_history(&h);
        assert_eq!(view.query(ItemId(0)).unwrap().into_vec(), ids(&[2, 3]));
    }

    #[test]
    fn meter_counts_and_memoizes() {
        struct Counting(std::sync::atomic::AtomicUsize, TableProvider);
        impl Oracle for Counting {
            fn k(&self) -> usize {
                self.1.k()
            }
            fn n_items(&self) -> usize {
                self.1.n_items()
            }
            fn query(&self, s: ItemId) -> Result<RecList> {
                self.0.fetch_add(1, Ordering::SeqCst);
                self.1.query(s)
            }
        }
        let t = TableProvider::new(1, vec![ids(&[1]), ids(&[2]), ids(&[0])]).unwrap();
        let inner = Counting(Default::default(), t);
        let (m, meter) = with_meter(&inner);
        for i in 0..3 {
            m.query(ItemId(i)).unwrap();
        }
        assert_eq!((meter.total(), meter.distinct()), (3, 3));
        m.reset();
        for _ in 0..3 {
            m.query(ItemId(1)).unwrap();
        }
        assert_eq!((meter.total(), meter.distinct()), (3, 1));
        assert_eq!(inner.0.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn table_rejects_self_loops() {
        assert!(TableProvider::new(1, vec![ids(&[0]), ids(&[0])]).is_err());
    }

    #[test]
    fn out_of_range_source_is_an_error() {
        let t = TableProvider::new(1, vec![ids(&[1]), ids(&[0])]).unwrap();
        assert!(matches!(t.query(ItemId(5)), Err(Error::Provider { .. })));
    }
}
