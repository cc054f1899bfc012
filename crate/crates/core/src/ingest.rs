// SPDX-License-Identifier: Apache-2.0

//! Loading interaction logs, attribute labels and item vectors from CSV, plus
//! the k-core filter and the leave-one-out split used for evaluation.
//!
//! All loaders re-index external integer ids densely in ascending id order, so
//! the dense ids of a file do not depend on its row order. The original ids
//! stay attached to the loaded value and can be written out as a remap table.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fairness::{AttributeTable, GroupId, ItemId};

/// Label given to items below the popularity threshold.
pub const PROTECTED_LABEL: &str = "protected";
/// Label given to items at or above the popularity threshold.
pub const UNPROTECTED_LABEL: &str = "unprotected";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Interaction {
    pub user: u32,
    pub item: ItemId,
    pub timestamp: Option<i64>,
}

/// Deduplicated implicit-feedback log with dense user and item ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteractionLog {
    rows: Vec<Interaction>,
    user_ids: Vec<u64>,
    item_ids: Vec<u64>,
}

impl InteractionLog {
    /// Builds a log from `(user, item, timestamp)` rows given in external ids.
    ///
    /// Repeated `(user, item)` pairs keep the occurrence with the smallest
    /// `(timestamp, row)` key; surviving rows keep their input order.
    pub fn from_rows<I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, u64, Option<i64>)>,
    {
        let raw: Vec<(u64, u64, Option<i64>)> = rows.into_iter().collect();
        if raw.is_empty() {
            return Err(Error::Empty("interaction log has no rows".into()));
        }
        let with_ts = raw[0].2.is_some();
        if raw.iter().any(|r| r.2.is_some() != with_ts) {
            return Err(Error::InvalidInput(
                "timestamps must be present on every row or on none".into(),
            ));
        }

        let mut keep: HashMap<(u64, u64), usize> = HashMap::with_capacity(raw.len());
        for (pos, r) in raw.iter().enumerate() {
            keep.entry((r.0, r.1))
                .and_modify(|best| {
                    if (r.2, pos) < (raw[*best].2, *best) {
                        *best = pos;
                    }
                })
                .or_insert(pos);
        }
        let mut kept: Vec<usize> = keep.into_values().collect();
        kept.sort_unstable();

        let user_ids = dense_ids(kept.iter().map(|&p| raw[p].0));
        let item_ids = dense_ids(kept.iter().map(|&p| raw[p].1));
        let user_index: HashMap<u64, u32> = index_of(&user_ids);
        let item_index: HashMap<u64, u32> = index_of(&item_ids);
        let rows = kept
            .into_iter()
            .map(|p| Interaction {
                user: user_index[&raw[p].0],
                item: ItemId(item_index[&raw[p].1]),
                timestamp: raw[p].2,
            })
            .collect();
        Ok(InteractionLog {
            rows,
            user_ids,
            item_ids,
        })
    }

    pub fn rows(&self) -> &[Interaction] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn has_timestamps(&self) -> bool {
        self.rows.first().is_some_and(|r| r.timestamp.is_some())
    }

    /// External id of each dense user id.
    pub fn user_ids(&self) -> &[u64] {
        &self.user_ids
    }

    /// External id of each dense item id.
    pub fn item_ids(&self) -> &[u64] {
        &self.item_ids
    }

    pub fn item_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_items()];
        for r in &self.rows {
            deg[r.item.index()] += 1;
        }
        deg
    }

    /// Rows with external ids, in log order.
    pub fn external_rows(&self) -> impl Iterator<Item = (u64, u64, Option<i64>)> + '_ {
        self.rows.iter().map(|r| {
            (
                self.user_ids[r.user as usize],
                self.item_ids[r.item.index()],
                r.timestamp,
            )
        })
    }

    fn empty() -> Self {
        InteractionLog {
            rows: Vec::new(),
            user_ids: Vec::new(),
            item_ids: Vec::new(),
        }
    }
}

fn dense_ids(ids: impl Iterator<Item = u64>) -> Vec<u64> {
    let mut v: Vec<u64> = ids.collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn index_of(ids: &[u64]) -> HashMap<u64, u32> {
    ids.iter().enumerate().map(|(i, &id)| (id, i as u32)).collect()
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn parse_field<T: std::str::FromStr>(
    name: &str,
    field: &str,
    what: &str,
    line: usize,
) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::parse(name, line, format!("cannot parse {what} from {field:?}")))
}

/// Parses `user,item[,timestamp]` rows. A first line of `user,item[,timestamp]`
/// is taken as the header; blank lines are skipped.
pub fn parse_interactions<R: Read>(reader: R, name: &str) -> Result<InteractionLog> {
    let mut rows = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::parse(name, lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if lineno == 1 && fields[0].trim() == "user" {
            continue;
        }
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::parse(
                name,
                lineno,
                format!("expected user,item[,timestamp], got {} fields", fields.len()),
            ));
        }
        let user = parse_field(name, fields[0], "user id", lineno)?;
        let item = parse_field(name, fields[1], "item id", lineno)?;
        let ts = match fields.get(2) {
            Some(f) => Some(parse_field(name, f, "timestamp", lineno)?),
            None => None,
        };
        if let Some(prev) = rows.first().map(|r: &(u64, u64, Option<i64>)| r.2.is_some()) {
            if prev != ts.is_some() {
                return Err(Error::parse(name, lineno, "timestamp column is inconsistent"));
            }
        }
        rows.push((user, item, ts));
    }
    if rows.is_empty() {
        return Err(Error::Empty(format!("{name}: no interaction rows")));
    }
    InteractionLog::from_rows(rows)
}

pub fn load_interactions(path: &Path) -> Result<InteractionLog> {
    parse_interactions(open(path)?, &path.display().to_string())
}

/// Writes the log with dense user and item ids; pair with [`write_remap`].
pub fn write_interactions<W: Write>(log: &InteractionLog, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let ts = log.has_timestamps();
    let header: &[&str] = if ts {
        &["user", "item", "timestamp"]
    } else {
        &["user", "item"]
    };
    w.write_record(header).map_err(csv_err)?;
    for r in log.rows() {
        let mut rec = vec![r.user.to_string(), r.item.to_string()];
        if let Some(t) = r.timestamp {
            rec.push(t.to_string());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Two-column `dense,original` table.
pub fn write_remap<W: Write>(ids: &[u64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["dense", "original"]).map_err(csv_err)?;
    for (d, o) in ids.iter().enumerate() {
        w.write_record([d.to_string(), o.to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        if let csv::ErrorKind::Io(io) = e.into_kind() {
            return Error::io("<csv>", io);
        }
        unreachable!("is_io_error checked");
    }
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse("<csv>", line, e.to_string())
}

/// Result of [`k_core`].
#[derive(Clone, Debug)]
pub struct KCore {
    pub log: InteractionLog,
    pub removed_users: usize,
    pub removed_items: usize,
}

impl KCore {
    /// Nothing survived the filter.
    pub fn is_empty(&self) -> bool {
        self.log.is_empty()
    }
}

/// Repeatedly drops users and items with fewer than `k` interactions until
/// every survivor has at least `k`; ids are re-densified afterwards.
pub fn k_core(log: &InteractionLog, k: usize) -> Result<KCore> {
    if k == 0 {
        return Err(Error::InvalidInput("k-core requires k >= 1".into()));
    }
    let (nu, ni) = (log.n_users(), log.n_items());
    let mut by_user: Vec<Vec<usize>> = vec![Vec::new(); nu];
    let mut by_item: Vec<Vec<usize>> = vec![Vec::new(); ni];
    for (e, r) in log.rows().iter().enumerate() {
        by_user[r.user as usize].push(e);
        by_item[r.item.index()].push(e);
    }
    let mut udeg: Vec<usize> = by_user.iter().map(Vec::len).collect();
    let mut ideg: Vec<usize> = by_item.iter().map(Vec::len).collect();
    let mut edge_alive = vec![true; log.len()];
    let mut ualive = vec![true; nu];
    let mut ialive = vec![true; ni];

    // Node ids: users are 0..nu, items are nu..nu+ni.
    let mut queue: VecDeque<usize> = VecDeque::new();
    queue.extend((0..nu).filter(|&u| udeg[u] < k));
    queue.extend((0..ni).filter(|&i| ideg[i] < k).map(|i| nu + i));
    while let Some(node) = queue.pop_front() {
        let edges = if node < nu {
            if !ualive[node] {
                continue;
            }
            ualive[node] = false;
            &by_user[node]
        } else {
            if !ialive[node - nu] {
                continue;
            }
            ialive[node - nu] = false;
            &by_item[node - nu]
        };
        for &e in edges {
            if !edge_alive[e] {
                continue;
            }
            edge_alive[e] = false;
            let r = log.rows()[e];
            let (u, i) = (r.user as usize, r.item.index());
            udeg[u] -= 1;
            ideg[i] -= 1;
            if ualive[u] && udeg[u] + 1 == k {
                queue.push_back(u);
            }
            if ialive[i] && ideg[i] + 1 == k {
                queue.push_back(nu + i);
            }
        }
    }

    let rows: Vec<(u64, u64, Option<i64>)> = log
        .external_rows()
        .zip(&edge_alive)
        .filter(|(_, &alive)| alive)
        .map(|(r, _)| r)
        .collect();
    let filtered = if rows.is_empty() {
        InteractionLog::empty()
    } else {
        InteractionLog::from_rows(rows)?
    };
    Ok(KCore {
        removed_users: nu - filtered.n_users(),
        removed_items: ni - filtered.n_items(),
        log: filtered,
    })
}

/// One user's held-out evaluation case.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UserSplit {
    pub user: u32,
    /// Second-latest interaction; the recommendation is made on its page.
    pub source: ItemId,
    /// Latest interaction; the held-out target.
    pub positive: ItemId,
    /// Every interaction except the positive, sorted by item id.
    pub history: Vec<ItemId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LeaveOneOutSplit {
    pub users: Vec<UserSplit>,
}

/// Holds out each user's latest interaction.
///
/// Interactions are ordered by `(timestamp, row)`. Logs without timestamps are
/// first arranged by a per-user shuffle drawn from a `ChaCha8Rng` seeded with
/// `seed`, visiting users in ascending dense id.
pub fn leave_one_out(log: &InteractionLog, seed: u64) -> Result<LeaveOneOutSplit> {
    let mut per_user: Vec<Vec<(Option<i64>, usize, ItemId)>> = vec![Vec::new(); log.n_users()];
    for (pos, r) in log.rows().iter().enumerate() {
        per_user[r.user as usize].push((r.timestamp, pos, r.item));
    }
    let offenders: Vec<u64> = per_user
        .iter()
        .enumerate()
        .filter(|(_, v)| v.len() < 2)
        .map(|(u, _)| log.user_ids()[u])
        .collect();
    if !offenders.is_empty() {
        return Err(Error::TooFewInteractions(offenders));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let timed = log.has_timestamps();
    let users = per_user
        .into_iter()
        .enumerate()
        .map(|(u, mut seq)| {
            if timed {
                seq.sort_unstable_by_key(|&(t, p, _)| (t, p));
            } else {
                seq.shuffle(&mut rng);
            }
            let positive = seq[seq.len() - 1].2;
            let source = seq[seq.len() - 2].2;
            let mut history: Vec<ItemId> = seq[..seq.len() - 1].iter().map(|x| x.2).collect();
            history.sort_unstable();
            UserSplit {
                user: u as u32,
                source,
                positive,
                history,
            }
        })
        .collect();
    Ok(LeaveOneOutSplit { users })
}

/// Labels items with fewer than `threshold` interactions as protected.
pub fn popularity_attributes(log: &InteractionLog, threshold: usize) -> AttributeTable {
    let names = vec![PROTECTED_LABEL.to_string(), UNPROTECTED_LABEL.to_string()];
    let groups = log
        .item_degrees()
        .into_iter()
        .map(|d| GroupId(if d < threshold { 0 } else { 1 }))
        .collect();
    AttributeTable::new(groups, names).expect("two fixed groups")
}

/// How item attributes are obtained.
pub enum AttributeRule<'a> {
    /// `item,label` CSV keyed by external item id.
    LabelFile(&'a Path),
    /// Popularity threshold over an interaction log.
    Popularity {
        log: &'a InteractionLog,
        threshold: usize,
    },
}

/// Builds the attribute table for the items whose external ids are `item_ids`.
pub fn load_attributes(rule: AttributeRule<'_>, item_ids: &[u64]) -> Result<AttributeTable> {
    match rule {
        AttributeRule::Popularity { log, threshold } => {
            if log.item_ids() != item_ids {
                return Err(Error::InvalidInput(
                    "popularity rule needs the log that defines the item universe".into(),
                ));
            }
            Ok(popularity_attributes(log, threshold))
        }
        AttributeRule::LabelFile(path) => {
            let labels = parse_label_file(open(path)?, &path.display().to_string())?;
            attributes_from_labels(&labels, item_ids)
        }
    }
}

/// Parses an `item,label` CSV into a map keyed by external item id.
pub fn parse_label_file<R: Read>(reader: R, name: &str) -> Result<BTreeMap<u64, String>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out = BTreeMap::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| Error::parse(name, line, e.to_string()))?;
        if rec.len() != 2 {
            return Err(Error::parse(name, line, "expected item,label"));
        }
        let item: u64 = parse_field(name, &rec[0], "item id", line)?;
        let label = rec[1].trim().to_string();
        if label.is_empty() {
            return Err(Error::parse(name, line, "empty label"));
        }
        if out.insert(item, label).is_some() {
            return Err(Error::parse(name, line, format!("item {item} labelled twice")));
        }
    }
    Ok(out)
}

pub fn attributes_from_labels(
    labels: &BTreeMap<u64, String>,
    item_ids: &[u64],
) -> Result<AttributeTable> {
    let mut ordered = Vec::with_capacity(item_ids.len());
    for id in item_ids {
        match labels.get(id) {
            Some(l) => ordered.push(l.as_str()),
            None => {
                return Err(Error::InvalidInput(format!("item {id} has no label")));
            }
        }
    }
    AttributeTable::from_labels(&ordered)
}

pub fn write_attributes<W: Write>(attrs: &AttributeTable, item_ids: &[u64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["item", "label"]).map_err(csv_err)?;
    for (d, &id) in item_ids.iter().enumerate() {
        let g = attrs.group_of(ItemId::new(d));
        w.write_record([id.to_string(), attrs.name(g).to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Fixed-width real vectors keyed by item, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorTable {
    item_ids: Vec<u64>,
    dim: usize,
    values: Vec<f64>,
}

/// Item features consumed by the Euclidean k-NN provider.
pub type FeatureTable = VectorTable;
/// Latent item vectors consumed by the inner-product provider.
pub type EmbeddingTable = VectorTable;

impl VectorTable {
    /// Rows are taken in order as dense items `0..n` with external ids `0..n`.
    pub fn from_rows(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: values.len(),
            });
        }
        let n = values.len() / dim;
        VectorTable::with_ids((0..n as u64).collect(), dim, values)
    }

    pub fn with_ids(item_ids: Vec<u64>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != item_ids.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: item_ids.len() * dim,
                found: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite vector entry {v}")));
        }
        if item_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("item ids must be strictly ascending".into()));
        }
        Ok(VectorTable {
            item_ids,
            dim,
            values,
        })
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn item_ids(&self) -> &[u64] {
        &self.item_ids
    }

    pub fn row(&self, item: ItemId) -> &[f64] {
        let s = item.index() * self.dim;
        &self.values[s..s + self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Parses `item,v0,..,v{d-1}` rows (header required); rows are re-ordered by item id.
pub fn parse_vectors<R: Read>(reader: R, name: &str) -> Result<VectorTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let dim = rdr
        .headers()
        .map_err(|e| Error::parse(name, 1, e.to_string()))?
        .len()
        .checked_sub(1)
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::parse(name, 1, "expected item,v0,..,v{d-1} header"))?;
    let mut rows: Vec<(u64, Vec<f64>)> = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| Error::parse(name, line, e.to_string()))?;
        if rec.len() != dim + 1 {
            return Err(Error::parse(
                name,
                line,
                format!("expected {} columns, got {}", dim + 1, rec.len()),
            ));
        }
        let id = parse_field(name, &rec[0], "item id", line)?;
        let v = rec
            .iter()
            .skip(1)
            .map(|f| parse_field::<f64>(name, f, "vector entry", line))
            .collect::<Result<Vec<_>>>()?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::parse(name, line, "non-finite vector entry"));
        }
        rows.push((id, v));
    }
    if rows.is_empty() {
        return Err(Error::Empty(format!("{name}: no vector rows")));
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidInput(format!("{name}: item {} listed twice", w[0].0)));
    }
    let ids = rows.iter().map(|r| r.0).collect();
    let values = rows.into_iter().flat_map(|r| r.1).collect();
    VectorTable::with_ids(ids, dim, values)
}

pub fn load_vectors(path: &Path) -> Result<VectorTable> {
    parse_vectors(open(path)?, &path.display().to_string())
}

pub fn write_vectors<W: Write>(table: &VectorTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["item".to_string()];
    header.extend((0..table.dim()).map(|j| format!("v{j}")));
    w.write_record(&header).map_err(csv_err)?;
    for (d, id) in table.item_ids().iter().enumerate() {
        let mut rec = vec![id.to_string()];
        // `{:?}` prints the shortest representation that parses back exactly.
        rec.extend(table.row(ItemId::new(d)).iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}
