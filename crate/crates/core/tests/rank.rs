// SPDX-License-Identifier: Apache-2.0

mod common;

use common::{dense_ppr, min_group_count, random_instance, random_lists};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use userrec::rank::{argsort_descending, privaterank_recommend};
use userrec::{consistency_threshold, ppr_cpi, row_normalize, ItemId, ItemSet, Oracle, PprParams, PrivateRank, RecNetwork};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cpi_converges_to_dense_solve(seed in any::<u64>(), n in 2usize..30, k in 1usize..5, c in 0.0f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lists = random_lists(&mut rng, n, k.min(n - 1));
        let net = row_normalize(&RecNetwork::from_lists(k, &lists).unwrap());
        let exact = dense_ppr(&lists, 0, c);
        let l = 600;
        let approx = ppr_cpi(&net, ItemId(0), &PprParams::new(c, l).unwrap()).unwrap();
        let err: f64 = approx.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum();
        prop_assert!(err <= c.powi(l as i32 + 1) + 1e-10, "err {err}");
        prop_assert!(approx.iter().all(|&x| x >= 0.0));
        prop_assert!(approx.iter().sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn privaterank_is_sound(seed in 0u64..10_000) {
        let inst = random_instance(seed, 10, 120, None);
        let pr = PrivateRank::crawl(&inst.provider, PprParams::default()).unwrap();
        for s in (0..inst.n).step_by(7).map(ItemId::new) {
            let rec = pr.recommend(s, &inst.attrs, inst.params, &ItemSet::new()).unwrap();
            prop_assert_eq!(rec.list.len(), 10);
            prop_assert!(min_group_count(rec.list.as_slice(), &inst.attrs) >= inst.params.tau());
            prop_assert!(!rec.list.contains(s));
        }
    }
}

#[test]
fn below_threshold_reproduces_provider_lists() {
    for seed in 0..20 {
        let inst = random_instance(500 + seed, 10, 150, Some(0));
        let c = consistency_threshold(10) * 0.99;
        let pr = PrivateRank::crawl(&inst.provider, PprParams::new(c, 10).unwrap()).unwrap();
        for s in (0..inst.n).map(ItemId::new) {
            let rec = pr.recommend(s, &inst.attrs, inst.params, &ItemSet::new()).unwrap();
            assert_eq!(rec.list, inst.provider.query(s).unwrap(), "seed {seed} source {s}");
        }
    }
}

#[test]
fn history_is_skipped_by_the_rerank() {
    let inst = random_instance(3, 10, 80, Some(0));
    let pr = PrivateRank::crawl(&inst.provider, PprParams::default()).unwrap();
    let s = ItemId(0);
    let full = pr.recommend(s, &inst.attrs, inst.params, &ItemSet::new()).unwrap();
    let history: ItemSet = full.list.iter().take(3).collect();
    let rec = pr.recommend(s, &inst.attrs, inst.params, &history).unwrap();
    assert!(rec.list.iter().all(|i| !history.contains(&i)));
    assert_eq!(rec.list.as_slice()[..7], full.list.as_slice()[3..]);
}

#[test]
fn scores_order_matches_dense_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let lists = random_lists(&mut rng, 25, 4);
    let net = row_normalize(&RecNetwork::from_lists(4, &lists).unwrap());
    let attrs = userrec::AttributeTable::from_indices(&[0; 25], 1).unwrap();
    let params = userrec::FairnessParams::new(4, 0, &attrs).unwrap();
    let ppr = PprParams::new(0.5, 200).unwrap();
    let rec = privaterank_recommend(&net, ItemId(2), &attrs, params, &ppr, &ItemSet::new()).unwrap();
    let want: Vec<ItemId> = argsort_descending(&dense_ppr(&lists, 2, 0.5))
        .into_iter()
        .filter(|&i| i != ItemId(2))
        .take(rec.list.len())
        .collect();
    assert_eq!(rec.list.into_vec(), want);
}
