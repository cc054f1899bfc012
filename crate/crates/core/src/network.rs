// SPDX-License-Identifier: Apache-2.0

//! The recommendation network: edge `i -> j` when `j` is on the page of `i`,
//! weighted by the rank discount of `j`'s position there.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::fairness::{rank_discount, ItemId};
use crate::ingest::csv_err;
use crate::provider::Oracle;

/// Crawled network in compressed-row layout.
#[derive(Clone, Debug, PartialEq)]
pub struct RecNetwork {
    offsets: Vec<usize>,
    targets: Vec<ItemId>,
    ranks: Vec<u32>,
    short_rows: Vec<ItemId>,
    k: usize,
}

impl RecNetwork {
    /// Builds the network from per-item lists (`lists[i]` is the page of `i`).
    pub fn from_lists(k: usize, lists: &[Vec<ItemId>]) -> Result<Self> {
        let n = lists.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut ranks = Vec::new();
        let mut short_rows = Vec::new();
        offsets.push(0);
        for (i, list) in lists.iter().enumerate() {
            if list.len() > k {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} entries, more than K = {k}",
                    list.len()
                )));
            }
            if list.len() < k {
                short_rows.push(ItemId::new(i));
            }
            for (r, &j) in list.iter().enumerate() {
                if j.index() >= n {
                    return Err(Error::InvalidInput(format!("edge {i} -> {j} leaves the universe")));
                }
                if j.index() == i {
                    return Err(Error::InvalidInput(format!("self-loop on item {i}")));
                }
                if list[..r].contains(&j) {
                    return Err(Error::InvalidInput(format!("duplicate edge {i} -> {j}")));
                }
                targets.push(j);
                ranks.push(r as u32 + 1);
            }
            offsets.push(targets.len());
        }
        Ok(RecNetwork {
            offsets,
            targets,
            ranks,
            short_rows,
            k,
        })
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_edges(&self) -> usize {
        self.targets.len()
    }

    /// Out-neighbours of `item` in rank order.
    pub fn row(&self, item: ItemId) -> &[ItemId] {
        let i = item.index();
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    /// `(target, rank, weight)` for each out-edge of `item`.
    pub fn edges(&self, item: ItemId) -> impl Iterator<Item = (ItemId, usize, f64)> + '_ {
        let i = item.index();
        (self.offsets[i]..self.offsets[i + 1]).map(move |e| {
            let r = self.ranks[e] as usize;
            (self.targets[e], r, rank_discount(r))
        })
    }

    /// Items whose page listed fewer than `K` recommendations.
    pub fn short_rows(&self) -> &[ItemId] {
        &self.short_rows
    }

    pub fn lists(&self) -> Vec<Vec<ItemId>> {
        (0..self.n()).map(|i| self.row(ItemId::new(i)).to_vec()).collect()
    }

    /// Writes `src,dst,rank` rows with a header, sources ascending.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["src", "dst", "rank"]).map_err(csv_err)?;
        for i in 0..self.n() {
            for (j, r, _) in self.edges(ItemId::new(i)) {
                w.write_record([i.to_string(), j.to_string(), r.to_string()])
                    .map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    /// Reads `src,dst,rank` rows. The universe is `n` items when given, else
    /// one past the largest id seen; `k` defaults to the largest rank.
    pub fn read_csv<R: Read>(input: R, name: &str, n: Option<usize>, k: Option<usize>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let mut edges: Vec<(usize, usize, usize)> = Vec::new();
        for (idx, rec) in rdr.records().enumerate() {
            let line = idx + 2;
            let rec = rec.map_err(|e| Error::parse(name, line, e.to_string()))?;
            if rec.len() != 3 {
                return Err(Error::parse(name, line, "expected src,dst,rank"));
            }
            let field = |c: usize, what: &str| -> Result<usize> {
                rec[c]
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(name, line, format!("cannot parse {what} from {:?}", &rec[c])))
            };
            let (s, d, r) = (field(0, "src")?, field(1, "dst")?, field(2, "rank")?);
            if r == 0 {
                return Err(Error::parse(name, line, "ranks are 1-based"));
            }
            edges.push((s, r, d));
        }
        let seen = edges.iter().map(|&(s, _, d)| s.max(d) + 1).max().unwrap_or(0);
        let n = n.unwrap_or(seen);
        if seen > n {
            return Err(Error::InvalidInput(format!(
                "{name}: item {} outside universe of {n}",
                seen - 1
            )));
        }
        let k = k.unwrap_or_else(|| edges.iter().map(|e| e.1).max().unwrap_or(0));
        edges.sort_unstable();
        let mut lists = vec![Vec::new(); n];
        for (s, r, d) in edges {
            if r != lists[s].len() + 1 {
                return Err(Error::InvalidInput(format!(
                    "{name}: ranks of item {s} are not 1..m without gaps"
                )));
            }
            lists[s].push(ItemId::new(d));
        }
        RecNetwork::from_lists(k, &lists)
    }
}

/// Queries the page of every item in `0..n_items()` exactly once.
///
/// Fails on the first item the oracle cannot answer.
pub fn crawl<O: Oracle + ?Sized>(oracle: &O) -> Result<RecNetwork> {
    let (n, k) = (oracle.n_items(), oracle.k());
    let mut lists = Vec::with_capacity(n);
    for i in 0..n {
        let item = ItemId::new(i);
        let fail = |message: String| Error::Provider { item, message };
        let list = oracle.query(item).map_err(|e| match e {
            Error::Provider { .. } => e,
            other => fail(other.to_string()),
        })?;
        if list.len() > k {
            return Err(fail(format!("returned {} items, more than K = {k}", list.len())));
        }
        if let Some(bad) = list.iter().find(|j| j.index() >= n || *j == item) {
            return Err(fail(format!("returned invalid item {bad}")));
        }
        lists.push(list.into_vec());
    }
    Ok(RecNetwork::from_lists(k, &lists).expect("lists validated during the crawl"))
}

/// Row-stochastic version of a [`RecNetwork`]; rows without out-edges stay zero.
#[derive(Clone, Debug, PartialEq)]
pub struct RowNormalizedNetwork {
    offsets: Vec<usize>,
    targets: Vec<ItemId>,
    weights: Vec<f64>,
    dangling: Vec<bool>,
}

pub fn row_normalize(net: &RecNetwork) -> RowNormalizedNetwork {
    let n = net.n();
    let mut weights = Vec::with_capacity(net.n_edges());
    let mut dangling = vec![false; n];
    for i in 0..n {
        let row: Vec<f64> = net.edges(ItemId::new(i)).map(|(_, _, w)| w).collect();
        let sum: f64 = row.iter().sum();
        if row.is_empty() {
            dangling[i] = true;
        }
        weights.extend(row.into_iter().map(|w| w / sum));
    }
    RowNormalizedNetwork {
        offsets: net.offsets.clone(),
        targets: net.targets.clone(),
        weights,
        dangling,
    }
}

impl RowNormalizedNetwork {
    pub fn n(&self) -> usize {
        self.dangling.len()
    }

    pub fn is_dangling(&self, item: ItemId) -> bool {
        self.dangling[item.index()]
    }

    /// `(target, weight)` pairs of the row of `item`.
    pub fn row(&self, item: ItemId) -> impl Iterator<Item = (ItemId, f64)> + '_ {
        let i = item.index();
        (self.offsets[i]..self.offsets[i + 1]).map(move |e| (self.targets[e], self.weights[e]))
    }

    /// `out = A~^T v` in one pass over the edges.
    pub fn transpose_apply_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.n();
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            });
        }
        if out.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: out.len(),
            });
        }
        out.fill(0.0);
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for e in self.offsets[i]..self.offsets[i + 1] {
                out[self.targets[e].index()] += self.weights[e] * vi;
            }
        }
        Ok(())
    }

    pub fn transpose_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n()];
        self.transpose_apply_into(v, &mut out)?;
        Ok(out)
    }
}
