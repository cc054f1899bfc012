// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::fairness::AttributeTable;
use crate::ingest::{VectorTable, PROTECTED_LABEL, UNPROTECTED_LABEL};

/// Share of items in the protected group.
pub const PROTECTED_SHARE: f64 = 0.3;

/// Standard deviation of the noise on the group-revealing feature.
pub const GROUP_FEATURE_NOISE: f64 = 0.25;

/// Items on the unit square with a class label and a minority group that
/// the provider's features give away.
///
/// Latent position `(x0, x1)` is uniform; the class label is `x0 > 0.5`; group
/// membership is independent of position. Features are `(x0, x1, g + noise)`,
/// so a k-NN provider keeps each group to itself.
#[derive(Clone, Debug)]
pub struct BiasedBenchmark {
    pub latent: VectorTable,
    pub features: VectorTable,
    pub attrs: AttributeTable,
    pub labels: Vec<u32>,
}

pub fn biased_benchmark(n: usize, min_group: usize, seed: u64) -> Result<BiasedBenchmark> {
    if n < 2 * min_group.max(1) {
        return Err(Error::InvalidInput(format!(
            "biased benchmark needs n >= {} for groups of {min_group}",
            2 * min_group.max(1)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, GROUP_FEATURE_NOISE).expect("finite sd");
    let mut latent = Vec::with_capacity(2 * n);
    let mut groups: Vec<u16> = Vec::with_capacity(n);
    for _ in 0..n {
        latent.push(rng.gen::<f64>());
        latent.push(rng.gen::<f64>());
        groups.push(u16::from(rng.gen::<f64>() < PROTECTED_SHARE));
    }
    // top up a group that came out too small, lowest ids first
    for g in 0..2u16 {
        let mut have = groups.iter().filter(|&&x| x == g).count();
        for x in groups.iter_mut() {
            if have >= min_group {
                break;
            }
            if *x != g {
                *x = g;
                have += 1;
            }
        }
    }
    let mut features = Vec::with_capacity(3 * n);
    for i in 0..n {
        features.extend_from_slice(&latent[2 * i..2 * i + 2]);
        features.push(f64::from(groups[i]) + noise.sample(&mut rng));
    }
    let labels = (0..n).map(|i| u32::from(latent[2 * i] > 0.5)).collect();
    // index 0 = protected, matching the sorted label order elsewhere
    let group_idx: Vec<u16> = groups.iter().map(|&g| 1 - g).collect();
    let attrs = AttributeTable::new(
        group_idx.into_iter().map(crate::fairness::GroupId).collect(),
        vec![PROTECTED_LABEL.to_string(), UNPROTECTED_LABEL.to_string()],
    )?;
    Ok(BiasedBenchmark {
        latent: VectorTable::from_rows(2, latent)?,
        features: VectorTable::from_rows(3, features)?,
        attrs,
        labels,
    })
}

/// `n` points drawn uniformly from the unit square.
pub fn uniform_square(n: usize, seed: u64) -> Result<VectorTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..2 * n).map(|_| rng.gen::<f64>()).collect();
    VectorTable::from_rows(2, values)
}
