// SPDX-License-Identifier: Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fairness::{rank_discount, ItemId, RecList};

/// Share of the `k` slots holding an item with the source's class label.
pub fn same_label_precision(source: ItemId, list: &RecList, labels: &[u32], k: usize) -> Result<f64> {
    let label = |i: ItemId| {
        labels
            .get(i.index())
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("item {i} has no class label")))
    };
    let want = label(source)?;
    let mut hits = 0usize;
    for i in list.iter() {
        if label(i)? == want {
            hits += 1;
        }
    }
    Ok(hits as f64 / k as f64)
}

/// Mean of [`same_label_precision`] over `(source, list)` pairs.
pub fn precision_same_label(cases: &[(ItemId, RecList)], labels: &[u32], k: usize) -> Result<f64> {
    if cases.is_empty() {
        return Err(Error::Empty("precision over zero lists".into()));
    }
    let mut sum = 0.0;
    for (s, l) in cases {
        sum += same_label_precision(*s, l, labels, k)?;
    }
    Ok(sum / cases.len() as f64)
}

/// 1 when the held-out item is in the list, else 0.
pub fn recall_at_k(list: &RecList, positive: ItemId) -> f64 {
    if list.contains(positive) {
        1.0
    } else {
        0.0
    }
}

/// nDCG with a single relevant item: `1 / log2(rank + 1)`, or 0 when absent.
pub fn ndcg_at_k(list: &RecList, positive: ItemId) -> f64 {
    list.rank_of(positive).map_or(0.0, rank_discount)
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Percentile bootstrap interval for the mean of paired differences `a - b`.
pub fn bootstrap_mean_diff(a: &[f64], b: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    assert_eq!(a.len(), b.len(), "paired samples differ in length");
    assert!(!a.is_empty(), "bootstrap over zero samples");
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = diffs.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| diffs[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let at = |q: f64| means[((q * resamples as f64) as usize).min(resamples - 1)];
    (at(tail), at(1.0 - tail))
}
