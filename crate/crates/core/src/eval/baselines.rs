// SPDX-License-Identifier: Apache-2.0

//! Reference recommenders for the trade-off tables.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fairness::{AttributeTable, FairnessParams, ItemId, ItemSet, Recommendation};
use crate::provider::Oracle;
use crate::rank::{argsort_descending, fair_rerank};

/// The provider's own list, with history filtered out when non-empty.
pub fn provider_asis<O: Oracle + ?Sized>(oracle: &O, source: ItemId, history: &ItemSet) -> Result<Recommendation> {
    let list = if history.is_empty() {
        oracle.query(source)?
    } else {
        oracle.query_excluding(source, history)?
    };
    Ok(Recommendation::from_list(list, oracle.k()))
}

/// Uniform shuffle of the universe, then greedy fair acceptance.
pub fn random_fair<R: Rng + ?Sized>(
    source: ItemId,
    attrs: &AttributeTable,
    params: FairnessParams,
    history: &ItemSet,
    rng: &mut R,
) -> Recommendation {
    let mut order: Vec<ItemId> = (0..attrs.n_items()).map(ItemId::new).collect();
    order.shuffle(rng);
    fair_rerank(order, source, attrs, params, history)
}

/// Greedy fair re-ranking of the provider's true score vector.
pub fn oracle_fair(
    scores: &[f64],
    source: ItemId,
    attrs: &AttributeTable,
    params: FairnessParams,
    history: &ItemSet,
) -> Result<Recommendation> {
    if scores.len() != attrs.n_items() {
        return Err(Error::DimensionMismatch {
            expected: attrs.n_items(),
            found: scores.len(),
        });
    }
    Ok(fair_rerank(argsort_descending(scores), source, attrs, params, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_fair_balances_at_half_k() {
        let attrs = AttributeTable::from_indices(&[0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1], 2).unwrap();
        let params = FairnessParams::new(6, 3, &attrs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for s in 0..12 {
            let rec = random_fair(ItemId(s), &attrs, params, &ItemSet::new(), &mut rng);
            assert_eq!(attrs.histogram(rec.list.as_slice()), vec![3, 3]);
            assert!(!rec.list.contains(ItemId(s)));
        }
    }

    #[test]
    fn oracle_fair_keeps_best_scores() {
        let attrs = AttributeTable::from_indices(&[0, 0, 0, 1, 1], 2).unwrap();
        let params = FairnessParams::new(2, 1, &attrs).unwrap();
        let scores = [9.0, 5.0, 4.0, 1.0, 2.0];
        let rec = oracle_fair(&scores, ItemId(0), &attrs, params, &ItemSet::new()).unwrap();
        assert_eq!(rec.list.into_vec(), vec![ItemId(1), ItemId(4)]);
    }
}
