// SPDX-License-Identifier: Apache-2.0

//! The tau sweep: every (dataset, method, tau) cell evaluated over a list of
//! seeds, aggregated into one row of a [`TradeoffReport`].
//!
//! Cells run concurrently on a dedicated rayon pool. Every recommendation
//! gets its own [`Metered`] view and its own RNG seed, so rows do not depend
//! on scheduling.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baselines::{oracle_fair, provider_asis, random_fair};
use super::metrics::{ndcg_at_k, recall_at_k, same_label_precision};
use crate::error::{Error, Result};
use crate::fairness::{least_ratio, list_entropy, AttributeTable, FairnessParams, ItemId, ItemSet, Recommendation};
use crate::ingest::LeaveOneOutSplit;
use crate::provider::{with_meter, Cached, Oracle, ScoreProvider, WithHistory};
use crate::rank::{PprParams, PrivateRank};
use crate::walk::{consul_recommend, privatewalk_recommend, WalkParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "provider")]
    Provider,
    #[serde(rename = "privaterank")]
    PrivateRank,
    #[serde(rename = "privatewalk")]
    PrivateWalk,
    #[serde(rename = "consul")]
    Consul,
    #[serde(rename = "random_fair")]
    RandomFair,
    #[serde(rename = "oracle_fair")]
    OracleFair,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Provider,
        Method::PrivateRank,
        Method::PrivateWalk,
        Method::Consul,
        Method::RandomFair,
        Method::OracleFair,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Provider => "provider",
            Method::PrivateRank => "privaterank",
            Method::PrivateWalk => "privatewalk",
            Method::Consul => "consul",
            Method::RandomFair => "random_fair",
            Method::OracleFair => "oracle_fair",
        }
    }

    /// Whether the method enforces the group floor.
    pub fn is_sound(self) -> bool {
        self != Method::Provider
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidInput(format!("unknown method {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// Method-specific knobs shared by every cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MethodParams {
    pub ppr: PprParams,
    pub privatewalk_steps: usize,
    pub consul_steps: usize,
}

impl Default for MethodParams {
    fn default() -> Self {
        MethodParams {
            ppr: PprParams::default(),
            privatewalk_steps: WalkParams::PRIVATEWALK_DEFAULT_STEPS,
            consul_steps: WalkParams::CONSUL_DEFAULT_STEPS,
        }
    }
}

/// What a list is scored against.
#[derive(Clone, Debug)]
pub enum Task {
    /// Precision against class labels; every item can be a source.
    SameLabel(Vec<u32>),
    /// Recall and nDCG of the held-out positive, recommending on the source's
    /// page with the user's history excluded.
    LeaveOneOut(LeaveOneOutSplit),
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    pub provider: ScoreProvider,
    pub attrs: AttributeTable,
    pub task: Task,
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub taus: Vec<usize>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub params: MethodParams,
    /// Queries per seed; `None` evaluates every source (or every user).
    pub queries: Option<usize>,
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
}

/// Everything measured for one recommendation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseOutcome {
    pub seed: u64,
    pub source: ItemId,
    pub len: usize,
    pub least_ratio: Option<f64>,
    pub entropy: Option<f64>,
    pub accuracy: f64,
    pub ndcg: Option<f64>,
    /// Distinct provider pages; `None` when the method reads scores directly.
    pub accesses: Option<u64>,
    pub short: bool,
    pub fallback: usize,
}

/// Per-recommendation RNG seed.
pub fn case_seed(seed: u64, case: usize) -> u64 {
    seed ^ (case as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// One recommendation from any method against a (possibly personalized)
/// provider view.
#[allow(clippy::too_many_arguments)]
pub fn recommend_with<O: Oracle + ?Sized>(
    method: Method,
    oracle: &O,
    scores: Option<&ScoreProvider>,
    privaterank: Option<&PrivateRank>,
    source: ItemId,
    attrs: &AttributeTable,
    params: FairnessParams,
    mp: &MethodParams,
    seed: u64,
    history: &ItemSet,
) -> Result<Recommendation> {
    match method {
        Method::Provider => provider_asis(oracle, source, history),
        Method::PrivateRank => match privaterank {
            Some(pr) => pr.recommend(source, attrs, params, history),
            None => PrivateRank::crawl(oracle, mp.ppr)?.recommend(source, attrs, params, history),
        },
        Method::PrivateWalk => {
            let walk = WalkParams::new(mp.privatewalk_steps, seed)?;
            privatewalk_recommend(oracle, source, attrs, params, &walk, history)
        }
        Method::Consul => {
            let walk = WalkParams::new(mp.consul_steps, seed)?;
            consul_recommend(oracle, source, attrs, params, &walk, history)
        }
        Method::RandomFair => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(random_fair(source, attrs, params, history, &mut rng))
        }
        Method::OracleFair => {
            let sp = scores.ok_or_else(|| {
                Error::InvalidInput("oracle_fair needs a score-based provider".into())
            })?;
            oracle_fair(&sp.scores(source)?, source, attrs, params, history)
        }
    }
}

/// A dataset with its shared page cache and, when needed, its crawled
/// PrivateRank network.
pub struct PreparedDataset<'a> {
    dataset: &'a Dataset,
    cached: Cached<&'a ScoreProvider>,
    privaterank: Option<(PrivateRank, u64)>,
}

impl<'a> PreparedDataset<'a> {
    pub fn new(dataset: &'a Dataset, params: &MethodParams, crawl: bool) -> Result<Self> {
        let cached = Cached::new(&dataset.provider);
        let privaterank = if crawl {
            let (metered, meter) = with_meter(&cached);
            let pr = PrivateRank::crawl(&metered, params.ppr)?;
            Some((pr, meter.distinct()))
        } else {
            None
        };
        Ok(PreparedDataset {
            dataset,
            cached,
            privaterank,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    /// `(source, history, positive)` triples evaluated under `seed`.
    fn cases(&self, seed: u64, queries: Option<usize>) -> Vec<(ItemId, ItemSet, Option<ItemId>)> {
        let pick = |n: usize| -> Vec<usize> {
            match queries {
                Some(m) if m < n => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut v = sample(&mut rng, n, m).into_vec();
                    v.sort_unstable();
                    v
                }
                _ => (0..n).collect(),
            }
        };
        match &self.dataset.task {
            Task::SameLabel(_) => pick(self.dataset.attrs.n_items())
                .into_iter()
                .map(|i| (ItemId::new(i), ItemSet::new(), None))
                .collect(),
            Task::LeaveOneOut(split) => pick(split.users.len())
                .into_iter()
                .map(|u| {
                    let s = &split.users[u];
                    (s.source, s.history.iter().copied().collect(), Some(s.positive))
                })
                .collect(),
        }
    }

    /// Every recommendation of one cell, in seed then case order.
    pub fn evaluate(&self, method: Method, tau: usize, config: &SweepConfig) -> Result<Vec<CaseOutcome>> {
        let ds = self.dataset;
        let k = ds.provider.k();
        let params = FairnessParams::new(k, tau, &ds.attrs)?;
        let mut out = Vec::new();
        for &seed in &config.seeds {
            let cases = self.cases(seed, config.queries);
            let rows: Vec<Result<CaseOutcome>> = cases
                .par_iter()
                .enumerate()
                .map(|(idx, (source, history, positive))| {
                    let view = WithHistory::new(&self.cached, history);
                    let (metered, meter) = with_meter(view);
                    let pr = self.privaterank.as_ref().map(|(p, _)| p);
                    let rec = recommend_with(
                        method,
                        &metered,
                        Some(&ds.provider),
                        pr,
                        *source,
                        &ds.attrs,
                        params,
                        &config.params,
                        case_seed(seed, idx),
                        history,
                    )?;
                    let accesses = match method {
                        Method::OracleFair => None,
                        Method::PrivateRank => Some(self.privaterank.as_ref().map_or(meter.distinct(), |p| p.1)),
                        _ => Some(meter.distinct()),
                    };
                    let list = &rec.list;
                    let (lr, ent) = if list.is_empty() {
                        (None, None)
                    } else {
                        (
                            Some(least_ratio(list, &ds.attrs)?.as_f64()),
                            Some(list_entropy(list, &ds.attrs)?),
                        )
                    };
                    let (accuracy, ndcg) = match (&ds.task, positive) {
                        (Task::SameLabel(labels), _) => (same_label_precision(*source, list, labels, k)?, None),
                        (Task::LeaveOneOut(_), Some(p)) => (recall_at_k(list, *p), Some(ndcg_at_k(list, *p))),
                        (Task::LeaveOneOut(_), None) => unreachable!("leave-one-out cases carry a positive"),
                    };
                    Ok(CaseOutcome {
                        seed,
                        source: *source,
                        len: list.len(),
                        least_ratio: lr,
                        entropy: ent,
                        accuracy,
                        ndcg,
                        accesses,
                        short: rec.short,
                        fallback: rec.fallback_count(),
                    })
                })
                .collect();
            for r in rows {
                out.push(r?);
            }
        }
        Ok(out)
    }
}

/// One aggregated row of the trade-off table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub method: Method,
    pub tau: usize,
    pub seeds: usize,
    pub lists: usize,
    pub short_lists: usize,
    pub least_ratio: Option<f64>,
    pub entropy: Option<f64>,
    pub accuracy: Option<f64>,
    pub ndcg: Option<f64>,
    pub accesses: Option<f64>,
    pub fallback_items: usize,
    /// Full-length lists whose least ratio is below `tau / K`.
    pub violations: usize,
    pub error: Option<String>,
}

impl ReportRow {
    fn failed(dataset: &str, method: Method, tau: usize, seeds: usize, err: &Error) -> Self {
        ReportRow {
            dataset: dataset.to_string(),
            method,
            tau,
            seeds,
            lists: 0,
            short_lists: 0,
            least_ratio: None,
            entropy: None,
            accuracy: None,
            ndcg: None,
            accesses: None,
            fallback_items: 0,
            violations: 0,
            error: Some(err.to_string()),
        }
    }

    pub fn aggregate(dataset: &str, method: Method, tau: usize, k: usize, seeds: usize, cases: &[CaseOutcome]) -> Self {
        fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
            let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
            (c > 0).then(|| s / c as f64)
        }
        let violations = cases
            .iter()
            .filter(|c| c.len == k && c.least_ratio.is_some_and(|r| r * (k as f64) < tau as f64 - 1e-9))
            .count();
        ReportRow {
            dataset: dataset.to_string(),
            method,
            tau,
            seeds,
            lists: cases.len(),
            short_lists: cases.iter().filter(|c| c.short).count(),
            least_ratio: mean(cases.iter().filter_map(|c| c.least_ratio)),
            entropy: mean(cases.iter().filter_map(|c| c.entropy)),
            accuracy: mean(cases.iter().map(|c| c.accuracy)),
            ndcg: mean(cases.iter().filter_map(|c| c.ndcg)),
            accesses: if cases.iter().any(|c| c.accesses.is_none()) {
                None
            } else {
                mean(cases.iter().filter_map(|c| c.accesses.map(|a| a as f64)))
            },
            fallback_items: cases.iter().map(|c| c.fallback).sum(),
            violations,
            error: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffReport {
    pub rows: Vec<ReportRow>,
}

/// Column names of the CSV report, in order.
pub const REPORT_COLUMNS: [&str; 14] = [
    "dataset",
    "method",
    "tau",
    "seeds",
    "lists",
    "short_lists",
    "least_ratio",
    "entropy",
    "accuracy",
    "ndcg",
    "accesses",
    "fallback_items",
    "violations",
    "error",
];

impl TradeoffReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::InvalidInput(format!("writing report: {e}")))?;
        }
        w.flush().map_err(|e| Error::io("report", e))?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)
            .map_err(|e| Error::InvalidInput(format!("writing report: {e}")))?;
        writeln!(out).map_err(|e| Error::io("report", e))?;
        Ok(())
    }

    pub fn rows_for<'a>(&'a self, dataset: &'a str, method: Method) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.dataset == dataset && r.method == method)
    }
}

/// JSON description of the report columns, for `--schema`.
pub fn report_schema() -> serde_json::Value {
    serde_json::json!({
        "format": "userrec tradeoff report",
        "csv": { "header": true, "columns": REPORT_COLUMNS },
        "json": { "rows": "array of objects keyed by the csv column names; empty csv cells are null" },
        "columns": {
            "dataset": "dataset name",
            "method": Method::ALL.iter().map(|m| m.name()).collect::<Vec<_>>(),
            "tau": "per-group floor",
            "seeds": "number of seeds averaged",
            "lists": "recommendations evaluated",
            "short_lists": "lists shorter than K because too few items were eligible",
            "least_ratio": "mean least ratio over non-empty lists",
            "entropy": "mean base-2 group entropy over non-empty lists",
            "accuracy": "mean same-label precision, or recall@K for interaction data",
            "ndcg": "mean nDCG@K for interaction data, empty otherwise",
            "accesses": "mean distinct provider pages per list; empty for oracle_fair",
            "fallback_items": "items placed by uniform fallback draws",
            "violations": "full-length lists with least ratio below tau / K",
            "error": "failure message when the cell could not be evaluated",
        }
    })
}

/// Evaluates the full (dataset, method, tau) cross product.
pub fn sweep(datasets: &[Dataset], config: &SweepConfig) -> Result<TradeoffReport> {
    if config.seeds.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one seed".into()));
    }
    let mut taus = config.taus.clone();
    taus.sort_unstable();
    taus.dedup();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;

    pool.install(|| {
        let need_crawl = config.methods.contains(&Method::PrivateRank);
        let mut rows = Vec::new();
        for ds in datasets {
            let prepared = PreparedDataset::new(ds, &config.params, need_crawl);
            let cells: Vec<(Method, usize)> = config
                .methods
                .iter()
                .flat_map(|&m| taus.iter().map(move |&t| (m, t)))
                .collect();
            let k = ds.provider.k();
            let n_seeds = config.seeds.len();
            let cell_rows: Vec<ReportRow> = cells
                .par_iter()
                .map(|&(method, tau)| {
                    let outcome = prepared
                        .as_ref()
                        .map_err(|e| Error::InvalidInput(e.to_string()))
                        .and_then(|p| p.evaluate(method, tau, config));
                    match outcome {
                        Ok(cases) => ReportRow::aggregate(&ds.name, method, tau, k, n_seeds, &cases),
                        Err(e) => ReportRow::failed(&ds.name, method, tau, n_seeds, &e),
                    }
                })
                .collect();
            rows.extend(cell_rows);
        }
        Ok(TradeoffReport { rows })
    })
}
