// SPDX-License-Identifier: Apache-2.0

//! PrivateRank: personalized PageRank over the crawled recommendation
//! network, followed by a greedy fair re-ranking of the PPR order.
//!
//! The PPR vector of source `i` is approximated by cumulative power iteration,
//! the truncated Neumann series
//!
//! ```text
//! S_hat = (1 - c) * sum_{k=0..L} (c A~^T)^k e_i
//! ```
//!
//! With `c` below [`consistency_threshold`] and no fairness constraint, the
//! provider's own list comes out on top in its original order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::{AttributeTable, FairListBuilder, FairnessParams, ItemId, ItemSet, Recommendation};
use crate::network::{crawl, row_normalize, RowNormalizedNetwork};
use crate::provider::Oracle;

/// Damping factor `c` and iteration count `L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PprParams {
    c: f64,
    iterations: usize,
}

impl PprParams {
    pub const DEFAULT_C: f64 = 0.01;
    pub const DEFAULT_ITERATIONS: usize = 10;

    /// `c` must lie in `[0, 1)`; `c = 0` degenerates to the source indicator.
    pub fn new(c: f64, iterations: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&c) {
            return Err(Error::Constraint(format!("damping factor c = {c} must be in [0, 1)")));
        }
        Ok(PprParams { c, iterations })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

impl Default for PprParams {
    fn default() -> Self {
        PprParams {
            c: Self::DEFAULT_C,
            iterations: Self::DEFAULT_ITERATIONS,
        }
    }
}

/// Largest damping factor for which PrivateRank with `tau = 0` is guaranteed
/// to reproduce the provider's lists: `1 / ((K + 1)^2 log2^2 (K + 1))`.
pub fn consistency_threshold(k: usize) -> f64 {
    let k1 = (k + 1) as f64;
    let l = k1.log2();
    1.0 / (k1 * k1 * l * l)
}

/// Truncated PPR series for `source`.
pub fn ppr_cpi(net: &RowNormalizedNetwork, source: ItemId, params: &PprParams) -> Result<Vec<f64>> {
    let n = net.n();
    if source.index() >= n {
        return Err(Error::InvalidInput(format!("source {source} outside universe of {n}")));
    }
    let mut term = vec![0.0; n];
    term[source.index()] = 1.0;
    let mut acc = term.clone();
    let mut next = vec![0.0; n];
    for _ in 0..params.iterations() {
        net.transpose_apply_into(&term, &mut next)?;
        for (x, a) in next.iter_mut().zip(acc.iter_mut()) {
            *x *= params.c();
            *a += *x;
        }
        std::mem::swap(&mut term, &mut next);
    }
    let scale = 1.0 - params.c();
    acc.iter_mut().for_each(|a| *a *= scale);
    Ok(acc)
}

/// Item ids sorted by descending score, ties by ascending id.
pub fn argsort_descending(scores: &[f64]) -> Vec<ItemId> {
    let mut order: Vec<ItemId> = (0..scores.len()).map(ItemId::new).collect();
    order.sort_by(|a, b| scores[b.index()].total_cmp(&scores[a.index()]).then(a.cmp(b)));
    order
}

/// Greedy fair re-ranking of a score vector: scan items by descending score
/// and keep each one the builder accepts until `K` are held.
pub fn fair_rerank(
    order: impl IntoIterator<Item = ItemId>,
    source: ItemId,
    attrs: &AttributeTable,
    params: FairnessParams,
    history: &ItemSet,
) -> Recommendation {
    let mut builder = FairListBuilder::new(attrs, params, source, history);
    for item in order {
        if builder.is_full() {
            break;
        }
        builder.try_push(item);
    }
    Recommendation::from_list(builder.finish(), params.k())
}

/// PrivateRank for one source over an already crawled network.
pub fn privaterank_recommend(
    net: &RowNormalizedNetwork,
    source: ItemId,
    attrs: &AttributeTable,
    params: FairnessParams,
    ppr: &PprParams,
    history: &ItemSet,
) -> Result<Recommendation> {
    if attrs.n_items() != net.n() {
        return Err(Error::DimensionMismatch {
            expected: net.n(),
            found: attrs.n_items(),
        });
    }
    let scores = ppr_cpi(net, source, ppr)?;
    Ok(fair_rerank(argsort_descending(&scores), source, attrs, params, history))
}

/// A crawled network ready to serve PrivateRank lists for any source.
#[derive(Clone, Debug)]
pub struct PrivateRank {
    net: RowNormalizedNetwork,
    ppr: PprParams,
}

impl PrivateRank {
    /// Crawls the whole provider (one query per item).
    pub fn crawl<O: Oracle + ?Sized>(oracle: &O, ppr: PprParams) -> Result<Self> {
        Ok(PrivateRank {
            net: row_normalize(&crawl(oracle)?),
            ppr,
        })
    }

    pub fn from_network(net: RowNormalizedNetwork, ppr: PprParams) -> Self {
        PrivateRank { net, ppr }
    }

    pub fn network(&self) -> &RowNormalizedNetwork {
        &self.net
    }

    pub fn recommend(
        &self,
        source: ItemId,
        attrs: &AttributeTable,
        params: FairnessParams,
        history: &ItemSet,
    ) -> Result<Recommendation> {
        privaterank_recommend(&self.net, source, attrs, params, &self.ppr, history)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::RecNetwork;

    fn ids(v: &[u32]) -> Vec<ItemId> {
        v.iter().map(|&i| ItemId(i)).collect()
    }

    fn two_cycle() -> RowNormalizedNetwork {
        row_normalize(&RecNetwork::from_lists(1, &[ids(&[1]), ids(&[0])]).unwrap())
    }

    #[test]
    fn threshold_values() {
        assert_eq!(consistency_threshold(1), 0.25);
        assert_eq!(consistency_threshold(3), 0.015625);
        let t = consistency_threshold(10);
        assert!((t - 6.9e-4).abs() < 5e-6, "{t}");
        assert!(1e-4 < t);
    }

    #[test]
    fn zero_iterations_is_scaled_indicator() {
        let p = PprParams::new(0.3, 0).unwrap();
        assert_eq!(ppr_cpi(&two_cycle(), ItemId(1), &p).unwrap(), vec![0.0, 0.7]);
    }

    #[test]
    fn zero_damping_is_indicator() {
        let p = PprParams::new(0.0, 25).unwrap();
        assert_eq!(ppr_cpi(&two_cycle(), ItemId(0), &p).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn two_cycle_matches_closed_form() {
        let c: f64 = 0.5;
        let p = PprParams::new(c, 30).unwrap();
        let s = ppr_cpi(&two_cycle(), ItemId(0), &p).unwrap();
        let d = 1.0 - c * c;
        assert!((s[0] - (1.0 - c) / d).abs() < 1e-6);
        assert!((s[1] - c * (1.0 - c) / d).abs() < 1e-6);
    }

    #[test]
    fn damping_must_be_below_one() {
        assert!(PprParams::new(1.0, 3).is_err());
        assert!(PprParams::new(-0.1, 3).is_err());
    }

    #[test]
    fn argsort_breaks_ties_by_id() {
        assert_eq!(argsort_descending(&[0.5, 1.0, 0.5, 1.0]), ids(&[1, 3, 0, 2]));
    }

    #[test]
    fn balanced_lists_at_half_k() {
        // star: 0 recommends 1..=4 (all group A); group B items 5..=8 hang off 4.
        let mut lists = vec![ids(&[1, 2, 3, 4]), vec![], vec![], vec![], ids(&[5, 6, 7, 8])];
        lists.extend((5..9).map(|_| vec![]));
        let net = row_normalize(&RecNetwork::from_lists(4, &lists).unwrap());
        let attrs = AttributeTable::from_indices(&[0, 0, 0, 0, 0, 1, 1, 1, 1], 2).unwrap();
        let params = FairnessParams::new(4, 2, &attrs).unwrap();
        let rec = privaterank_recommend(&net, ItemId(0), &attrs, params, &PprParams::default(), &ItemSet::new())
            .unwrap();
        assert_eq!(attrs.histogram(rec.list.as_slice()), vec![2, 2]);
        assert!(!rec.short);
    }
}
