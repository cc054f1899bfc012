// SPDX-License-Identifier: Apache-2.0

//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use userrec::ingest::VectorTable;
use userrec::{AttributeTable, FairnessParams, ItemId, ScoreProvider};

pub fn ids(v: &[u32]) -> Vec<ItemId> {
    v.iter().map(|&i| ItemId(i)).collect()
}

/// PPR by a dense linear solve of `(I - c A~^T) s = (1 - c) e_source`, with
/// `A~` the rank-weighted, row-normalized adjacency built from scratch.
pub fn dense_ppr(lists: &[Vec<ItemId>], source: usize, c: f64) -> Vec<f64> {
    let n = lists.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (i, l) in lists.iter().enumerate() {
        let w: Vec<f64> = (1..=l.len()).map(|r| 1.0 / ((r + 1) as f64).log2()).collect();
        let total: f64 = w.iter().sum();
        for (j, wj) in l.iter().zip(&w) {
            a[(i, j.index())] = wj / total;
        }
    }
    let m = DMatrix::<f64>::identity(n, n) - a.transpose() * c;
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[source] = 1.0 - c;
    m.lu().solve(&rhs).expect("I - cA^T is invertible for c < 1").iter().copied().collect()
}

/// All-pairs hop distances by plain BFS on the undirected version of the
/// graph; unreachable pairs get `n`.
pub fn bfs_all_pairs(lists: &[Vec<ItemId>]) -> Vec<Vec<f64>> {
    let n = lists.len();
    let mut adj = vec![HashSet::new(); n];
    for (i, l) in lists.iter().enumerate() {
        for j in l {
            adj[i].insert(j.index());
            adj[j.index()].insert(i);
        }
    }
    (0..n)
        .map(|s| {
            let mut d = vec![n as f64; n];
            d[s] = 0.0;
            let mut q = VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                for &v in &adj[u] {
                    if d[v] == n as f64 && v != s {
                        d[v] = d[u] + 1.0;
                        q.push_back(v);
                    }
                }
            }
            d
        })
        .collect()
}

/// Top-`k` by a caller-supplied score, ties by ascending index, source
/// excluded.
pub fn brute_top_k(n: usize, k: usize, source: usize, score: impl Fn(usize) -> f64) -> Vec<ItemId> {
    let mut all: Vec<usize> = (0..n).filter(|&j| j != source).collect();
    all.sort_by(|&a, &b| score(b).partial_cmp(&score(a)).unwrap().then(a.cmp(&b)));
    all.into_iter().take(k).map(ItemId::new).collect()
}

/// Count of the smallest group in the list.
pub fn min_group_count(list: &[ItemId], attrs: &AttributeTable) -> usize {
    attrs.histogram(list).into_iter().min().unwrap_or(0)
}

/// A random fairness instance: items with random features, a random group
/// assignment leaving every group at least `tau + 1` members, and a score
/// provider over the features.
pub struct Instance {
    pub provider: ScoreProvider,
    pub attrs: AttributeTable,
    pub params: FairnessParams,
    pub n: usize,
}

pub fn random_instance(seed: u64, k: usize, n_max: usize, tau: Option<usize>) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_groups = rng.gen_range(2..=3usize);
    let tau = tau.unwrap_or_else(|| rng.gen_range(0..=k / n_groups));
    let n = rng.gen_range((n_groups * (tau + 1)).max(k + 1).max(20)..=n_max);
    // guarantee tau + 1 per group, the rest uniform
    let mut groups: Vec<u16> = (0..n_groups as u16).flat_map(|g| std::iter::repeat_n(g, tau + 1)).collect();
    while groups.len() < n {
        groups.push(rng.gen_range(0..n_groups as u16));
    }
    groups.shuffle(&mut rng);
    let attrs = AttributeTable::from_indices(&groups, n_groups).unwrap();
    let dim = rng.gen_range(1..=4usize);
    let values: Vec<f64> = (0..n * dim).map(|_| rng.gen::<f64>()).collect();
    let table = VectorTable::from_rows(dim, values).unwrap();
    let provider = if rng.gen_bool(0.5) {
        ScoreProvider::knn(&table, k).unwrap()
    } else {
        ScoreProvider::dot(&table, k).unwrap()
    };
    let params = FairnessParams::new(k, tau, &attrs).unwrap();
    Instance {
        provider,
        attrs,
        params,
        n,
    }
}

/// Random provider lists with lengths in `0..=k` (dangling rows included).
pub fn random_lists(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<ItemId>> {
    (0..n)
        .map(|i| {
            let len = if rng.gen_bool(0.1) { 0 } else { rng.gen_range(1..=k.min(n - 1)) };
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.shuffle(rng);
            others.into_iter().take(len).map(ItemId::new).collect()
        })
        .collect()
}
