// SPDX-License-Identifier: Apache-2.0

//! Metrics, baselines, synthetic data and the tau sweep.

pub mod baselines;
pub mod metrics;
pub mod sweep;
pub mod synth;

pub use baselines::{oracle_fair, provider_asis, random_fair};
pub use metrics::{bootstrap_mean_diff, ndcg_at_k, precision_same_label, recall_at_k, same_label_precision};
pub use sweep::{
    recommend_with, report_schema, sweep, CaseOutcome, Dataset, Method, MethodParams, PreparedDataset, ReportRow,
    SweepConfig, Task, TradeoffReport,
};
pub use synth::{biased_benchmark, uniform_square, BiasedBenchmark};
