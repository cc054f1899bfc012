// SPDX-License-Identifier: Apache-2.0

mod common;

use common::brute_top_k;
use proptest::prelude::*;
use userrec::ingest::{InteractionLog, VectorTable};
use userrec::{with_meter, Cached, ItemId, ItemSet, Oracle, ScoreProvider, WithHistory};

fn table(dim: usize, values: Vec<f64>) -> VectorTable {
    VectorTable::from_rows(dim, values).unwrap()
}

/// Z-scores computed independently of the library, constant columns dropped.
fn standardize(values: &[f64], dim: usize) -> Vec<Vec<f64>> {
    let n = values.len() / dim;
    let mut cols = Vec::new();
    for j in 0..dim {
        let col: Vec<f64> = (0..n).map(|i| values[i * dim + j]).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        if var > 0.0 {
            cols.push(col.iter().map(|x| (x - mean) / var.sqrt()).collect::<Vec<f64>>());
        }
    }
    (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

proptest! {
    #[test]
    fn knn_matches_brute_force(dim in 1usize..4, raw in proptest::collection::vec(0u8..6, 12..90)) {
        let n = raw.len() / dim;
        prop_assume!(n >= 6);
        let values: Vec<f64> = raw[..n * dim].iter().map(|&x| f64::from(x)).collect();
        let k = 4;
        let p = ScoreProvider::knn(&table(dim, values.clone()), k).unwrap();
        let z = standardize(&values, dim);
        for s in 0..n {
            let d = |j: usize| -z[s].iter().zip(&z[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let got = p.query(ItemId::new(s)).unwrap().into_vec();
            let want = brute_top_k(n, k, s, d);
            // equal distances may be computed with different rounding; compare scores
            let gs: Vec<f64> = got.iter().map(|i| d(i.index())).collect();
            let ws: Vec<f64> = want.iter().map(|i| d(i.index())).collect();
            for (a, b) in gs.iter().zip(&ws) {
                prop_assert!((a - b).abs() < 1e-9, "{got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn dot_matches_brute_force(raw in proptest::collection::vec(-3i8..4, 16..80)) {
        let dim = 2;
        let n = raw.len() / dim;
        let values: Vec<f64> = raw[..n * dim].iter().map(|&x| f64::from(x)).collect();
        let k = 3;
        let p = ScoreProvider::dot(&table(dim, values.clone()), k).unwrap();
        for s in 0..n {
            let dot = |j: usize| values[s * 2] * values[j * 2] + values[s * 2 + 1] * values[j * 2 + 1];
            prop_assert_eq!(p.query(ItemId::new(s)).unwrap().into_vec(), brute_top_k(n, k, s, dot));
        }
    }

    #[test]
    fn history_view_refills_from_deeper_ranks(raw in proptest::collection::vec(0u8..20, 20..60), hist in proptest::collection::btree_set(0usize..20, 0..8)) {
        let n = raw.len();
        let values: Vec<f64> = raw.iter().map(|&x| f64::from(x)).collect();
        let k = 5;
        let p = ScoreProvider::dot(&table(1, values.clone()), k).unwrap();
        let history: ItemSet = hist.iter().filter(|&&h| h < n).map(|&h| ItemId::new(h)).collect();
        let view = WithHistory::new(&p, &history);
        for s in 0..n {
            let got = view.query(ItemId::new(s)).unwrap().into_vec();
            let mut want: Vec<usize> = (0..n).filter(|&j| j != s && !history.contains(&ItemId::new(j))).collect();
            want.sort_by(|&a, &b| (values[s] * values[b]).total_cmp(&(values[s] * values[a])).then(a.cmp(&b)));
            let want: Vec<ItemId> = want.into_iter().take(k).map(ItemId::new).collect();
            prop_assert_eq!(got, want);
        }
    }
}

#[test]
fn cosine_matches_brute_force() {
    let rows: Vec<(u64, u64, Option<i64>)> = (0..40u64)
        .flat_map(|u| (0..12u64).filter(move |i| (u * 7 + i * 3) % 5 < 2).map(move |i| (u, i, None)))
        .collect();
    let log = InteractionLog::from_rows(rows.clone()).unwrap();
    let n = log.n_items();
    let users_of = |i: usize| -> Vec<u32> {
        log.rows().iter().filter(|r| r.item.index() == i).map(|r| r.user).collect()
    };
    let cos = |a: usize, b: usize| {
        let (ua, ub) = (users_of(a), users_of(b));
        let common = ua.iter().filter(|u| ub.contains(u)).count() as f64;
        if ua.is_empty() || ub.is_empty() {
            f64::NEG_INFINITY
        } else {
            common / ((ua.len() * ub.len()) as f64).sqrt()
        }
    };
    let p = ScoreProvider::cosine(&log, 4).unwrap();
    for s in 0..n {
        let got = p.query(ItemId::new(s)).unwrap().into_vec();
        let want = brute_top_k(n, 4, s, |j| cos(s, j));
        let gs: Vec<f64> = got.iter().map(|i| cos(s, i.index())).collect();
        let ws: Vec<f64> = want.iter().map(|i| cos(s, i.index())).collect();
        for (a, b) in gs.iter().zip(&ws) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn meter_counts_distinct_pages() {
    let p = ScoreProvider::dot(&table(1, (0..30).map(f64::from).collect()), 3).unwrap();
    let cached = Cached::new(&p);
    let (m, meter) = with_meter(&cached);
    for s in [1, 2, 1, 1, 7, 2] {
        m.query(ItemId(s)).unwrap();
    }
    assert_eq!((meter.total(), meter.distinct()), (6, 3));
    m.reset();
    assert_eq!((meter.total(), meter.distinct()), (0, 0));
}

#[test]
fn out_of_range_source_is_a_provider_error() {
    let p = ScoreProvider::dot(&table(1, vec![1.0, 2.0, 3.0]), 2).unwrap();
    assert!(matches!(p.query(ItemId(3)), Err(userrec::Error::Provider { .. })));
}
