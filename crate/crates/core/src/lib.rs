// SPDX-License-Identifier: Apache-2.0

//! User-side fair recommenders built on oracle access to an item-to-item
//! provider: PrivateRank, PrivateWalk and Consul, plus embedding recovery
//! from the provider's k-NN graph and an evaluation harness.

pub mod cli;
pub mod error;
pub mod eval;
pub mod fairness;
pub mod ingest;
pub mod network;
pub mod provider;
pub mod rank;
pub mod recover;
pub mod walk;

pub use error::{Error, Result};
pub use fairness::{
    least_ratio, list_entropy, AttributeTable, FairListBuilder, FairnessParams, GroupId, GroupLedger, ItemId, ItemSet,
    Ratio, RecList, Recommendation,
};
pub use network::{crawl, row_normalize, RecNetwork, RowNormalizedNetwork};
pub use provider::{with_meter, AccessMeter, Cached, Metered, Oracle, ScoreProvider, TableProvider, WithHistory};
pub use rank::{consistency_threshold, ppr_cpi, PprParams, PrivateRank};
pub use walk::{consul_recommend, privatewalk_recommend, WalkParams};
