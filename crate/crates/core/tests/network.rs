// SPDX-License-Identifier: Apache-2.0

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use userrec::{crawl, row_normalize, ItemId, RecNetwork, TableProvider};

proptest! {
    #[test]
    fn rows_are_stochastic_or_dangling(seed in any::<u64>(), n in 2usize..40, k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lists = common::random_lists(&mut rng, n, k);
        let net = RecNetwork::from_lists(k, &lists).unwrap();
        let norm = row_normalize(&net);
        for i in 0..n {
            let s: f64 = norm.row(ItemId::new(i)).map(|(_, w)| w).sum();
            if lists[i].is_empty() {
                prop_assert!(norm.is_dangling(ItemId::new(i)));
            } else {
                prop_assert!((s - 1.0).abs() < 1e-12);
                // weights fall with rank
                let w: Vec<f64> = norm.row(ItemId::new(i)).map(|(_, w)| w).collect();
                prop_assert!(w.windows(2).all(|p| p[0] > p[1]));
            }
        }
        // mass is preserved except at dangling rows
        let v: Vec<f64> = (0..n).map(|i| (i + 1) as f64).collect();
        let out = norm.transpose_apply(&v).unwrap();
        let kept: f64 = (0..n).filter(|&i| !lists[i].is_empty()).map(|i| v[i]).sum();
        prop_assert!((out.iter().sum::<f64>() - kept).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trip(seed in any::<u64>(), n in 2usize..30, k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lists = common::random_lists(&mut rng, n, k);
        let net = RecNetwork::from_lists(k, &lists).unwrap();
        let mut out = Vec::new();
        net.write_csv(&mut out).unwrap();
        let back = RecNetwork::read_csv(out.as_slice(), "net", Some(n), Some(k)).unwrap();
        prop_assert_eq!(back.lists(), lists);
    }
}

#[test]
fn crawl_reproduces_the_table() {
    let lists = vec![common::ids(&[1, 2]), common::ids(&[2]), common::ids(&[0, 1])];
    let p = TableProvider::new(2, lists.clone()).unwrap();
    let net = crawl(&p).unwrap();
    assert_eq!(net.lists(), lists);
    assert_eq!(net.short_rows(), &[ItemId(1)]);
    assert_eq!(net.n_edges(), 5);
}

#[test]
fn rank_gaps_are_rejected() {
    let text = "src,dst,rank\n0,1,1\n0,2,3\n";
    assert!(RecNetwork::read_csv(text.as_bytes(), "gap", Some(3), Some(3)).is_err());
}
