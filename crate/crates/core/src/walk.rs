// SPDX-License-Identifier: Apache-2.0

//! Query-local recommenders that only touch the pages they walk through.
//!
//! [`privatewalk_recommend`] fills each slot with a fresh rank-discounted
//! random walk from the source. [`consul_recommend`] runs one deterministic
//! depth-first search and harvests every acceptable item on each page it
//! visits. Both fall back to uniform draws over the universe when the walk
//! runs out.
//!
//! Randomness comes from a `ChaCha8Rng` seeded with [`WalkParams::seed`]. Each
//! rank draw consumes exactly one `f64` from the generator (inverse CDF over
//! the cumulative rank weights); each fallback draw consumes one
//! `gen_range(0..n)`.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::{rank_discount, AttributeTable, FairListBuilder, FairnessParams, ItemId, ItemSet, Recommendation};
use crate::provider::Oracle;

/// Upper bound on uniform fallback draws for one slot.
pub const FALLBACK_DRAW_CAP: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkParams {
    max_steps: usize,
    seed: u64,
}

impl WalkParams {
    pub const PRIVATEWALK_DEFAULT_STEPS: usize = 100;
    pub const CONSUL_DEFAULT_STEPS: usize = 10;

    pub fn new(max_steps: usize, seed: u64) -> Result<Self> {
        if max_steps == 0 {
            return Err(Error::Constraint("L_max must be at least 1".into()));
        }
        Ok(WalkParams { max_steps, seed })
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Categorical distribution over ranks `1..=k` with mass proportional to
/// `1 / log2(r + 1)`.
#[derive(Clone, Debug)]
pub struct RankSampler {
    cumulative: Vec<f64>,
}

impl RankSampler {
    pub fn new(k: usize) -> Self {
        assert!(k >= 1, "rank sampler needs k >= 1");
        let mut acc = 0.0;
        let cumulative = (1..=k)
            .map(|r| {
                acc += rank_discount(r);
                acc
            })
            .collect();
        RankSampler { cumulative }
    }

    pub fn k(&self) -> usize {
        self.cumulative.len()
    }

    pub fn probability(&self, rank: usize) -> f64 {
        let total = self.cumulative[self.k() - 1];
        rank_discount(rank) / total
    }

    /// 1-based rank.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = self.cumulative[self.k() - 1];
        let u: f64 = rng.gen::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.k() - 1) + 1
    }
}

/// One draw from the rank-discount distribution over `1..=k`.
pub fn rank_discount_sample<R: Rng + ?Sized>(k: usize, rng: &mut R) -> usize {
    RankSampler::new(k).sample(rng)
}

/// Appends one uniformly drawn acceptable item; `Ok(false)` when none is left.
fn fallback_one<R: Rng + ?Sized>(
    builder: &mut FairListBuilder<'_>,
    n: usize,
    rng: &mut R,
) -> Result<bool> {
    for _ in 0..FALLBACK_DRAW_CAP {
        if builder.try_push(ItemId::new(rng.gen_range(0..n))) {
            return Ok(true);
        }
    }
    if (0..n).map(ItemId::new).any(|i| builder.accepts(i)) {
        return Err(Error::FallbackExhausted {
            draws: FALLBACK_DRAW_CAP,
        });
    }
    Ok(false)
}

fn check_inputs<O: Oracle + ?Sized>(oracle: &O, source: ItemId, attrs: &AttributeTable) -> Result<()> {
    if attrs.n_items() != oracle.n_items() {
        return Err(Error::DimensionMismatch {
            expected: oracle.n_items(),
            found: attrs.n_items(),
        });
    }
    if source.index() >= oracle.n_items() {
        return Err(Error::InvalidInput(format!(
            "source {source} outside universe of {}",
            oracle.n_items()
        )));
    }
    Ok(())
}

/// PrivateWalk: one rank-discounted random walk per slot.
///
/// Every slot restarts at `source` and follows up to `L_max` steps; the first
/// item that can be added is taken. A walk that finds nothing (or reaches a
/// page with no recommendations) falls back to a uniform draw.
pub fn privatewalk_recommend<O: Oracle + ?Sized>(
    oracle: &O,
    source: ItemId,
    attrs: &AttributeTable,
    params: FairnessParams,
    walk: &WalkParams,
    history: &ItemSet,
) -> Result<Recommendation> {
    check_inputs(oracle, source, attrs)?;
    let n = oracle.n_items();
    let mut rng = walk.rng();
    let mut samplers: Vec<Option<RankSampler>> = vec![None; oracle.k() + 1];
    let mut builder = FairListBuilder::new(attrs, params, source, history);
    let mut from_fallback = Vec::with_capacity(params.k());
    let mut short = false;

    while !builder.is_full() {
        let mut cur = source;
        let mut found = false;
        for _ in 0..walk.max_steps() {
            let page = oracle.query(cur)?;
            if page.is_empty() {
                break;
            }
            let m = page.len();
            if samplers.len() <= m {
                samplers.resize(m + 1, None);
            }
            let rank = samplers[m].get_or_insert_with(|| RankSampler::new(m)).sample(&mut rng);
            cur = page.as_slice()[rank - 1];
            if builder.try_push(cur) {
                found = true;
                break;
            }
        }
        if found {
            from_fallback.push(false);
        } else if fallback_one(&mut builder, n, &mut rng)? {
            from_fallback.push(true);
        } else {
            short = true;
            break;
        }
    }
    Ok(Recommendation {
        list: builder.finish(),
        from_fallback,
        short,
    })
}

/// Consul: deterministic depth-first search over provider pages.
///
/// Visits at most `L_max` distinct pages, starting with the source. Each page
/// is scanned in rank order and every acceptable item is appended; its
/// recommendations are then pushed so the rank-1 item is explored next. If
/// the list is still short when the budget or the stack runs out, the rest is
/// filled by uniform draws.
pub fn consul_recommend<O: Oracle + ?Sized>(
    oracle: &O,
    source: ItemId,
    attrs: &AttributeTable,
    params: FairnessParams,
    walk: &WalkParams,
    history: &ItemSet,
) -> Result<Recommendation> {
    check_inputs(oracle, source, attrs)?;
    let n = oracle.n_items();
    let mut builder = FairListBuilder::new(attrs, params, source, history);
    let mut visited: HashSet<ItemId> = HashSet::new();
    let mut stack: Vec<ItemId> = Vec::new();
    let mut page_item = source;

    'search: for _ in 0..walk.max_steps() {
        while visited.contains(&page_item) {
            match stack.pop() {
                Some(next) => page_item = next,
                None => break 'search,
            }
        }
        visited.insert(page_item);
        let page = oracle.query(page_item)?;
        for j in page.iter() {
            builder.try_push(j);
            if builder.is_full() {
                let list = builder.finish();
                return Ok(Recommendation::from_list(list, params.k()));
            }
        }
        stack.extend(page.iter().rev());
    }

    let mut from_fallback = vec![false; builder.len()];
    let mut short = false;
    if !builder.is_full() {
        let mut rng = walk.rng();
        while !builder.is_full() {
            if fallback_one(&mut builder, n, &mut rng)? {
                from_fallback.push(true);
            } else {
                short = true;
                break;
            }
        }
    }
    Ok(Recommendation {
        list: builder.finish(),
        from_fallback,
        short,
    })
}
