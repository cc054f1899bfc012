// SPDX-License-Identifier: Apache-2.0

//! Item, group and list vocabulary shared by every recommender, together with
//! the group-deficit arithmetic that keeps lists fair while they are built.
//!
//! Fairness here is measured per list: the *least ratio* is the smallest share
//! any sensitive group holds in the list, and a list is fair at level `tau` when
//! every group contributes at least `tau` of its `K` slots.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense item index in `[0, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u32);

impl ItemId {
    pub fn new(index: usize) -> Self {
        ItemId(u32::try_from(index).expect("item index exceeds u32"))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Dense index of a sensitive group within an [`AttributeTable`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupId(pub u16);

impl GroupId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

pub type ItemSet = HashSet<ItemId>;

/// Discount applied to the item at 1-based `rank`: `1 / log2(rank + 1)`.
///
/// Edge weights, the walk's rank distribution and nDCG all share this base.
pub fn rank_discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// Total mapping from items to sensitive-group labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributeTable {
    groups: Vec<GroupId>,
    names: Vec<String>,
}

impl AttributeTable {
    /// Builds a table from per-item group indices and the group names they point to.
    pub fn new(groups: Vec<GroupId>, names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidInput("attribute table has no groups".into()));
        }
        if names.len() > u16::MAX as usize {
            return Err(Error::InvalidInput("too many groups".into()));
        }
        if let Some(g) = groups.iter().find(|g| g.index() >= names.len()) {
            return Err(Error::InvalidInput(format!(
                "group index {} out of range for {} groups",
                g.0,
                names.len()
            )));
        }
        if !groups.is_empty() && names.len() > groups.len() {
            return Err(Error::InvalidInput(format!(
                "{} groups declared for {} items",
                names.len(),
                groups.len()
            )));
        }
        Ok(AttributeTable { groups, names })
    }

    /// Builds a table from string labels; group ids follow the sorted label order.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let mut index: BTreeMap<&str, u16> = BTreeMap::new();
        for l in labels {
            index.entry(l.as_ref()).or_insert(0);
        }
        for (i, v) in index.values_mut().enumerate() {
            *v = i as u16;
        }
        let names = index.keys().map(|s| s.to_string()).collect();
        let groups = labels
            .iter()
            .map(|l| GroupId(index[l.as_ref()]))
            .collect();
        AttributeTable::new(groups, names)
    }

    pub fn from_indices(groups: &[u16], n_groups: usize) -> Result<Self> {
        let names = (0..n_groups).map(|g| g.to_string()).collect();
        AttributeTable::new(groups.iter().map(|&g| GroupId(g)).collect(), names)
    }

    pub fn n_items(&self) -> usize {
        self.groups.len()
    }

    pub fn n_groups(&self) -> usize {
        self.names.len()
    }

    pub fn group_of(&self, item: ItemId) -> GroupId {
        self.groups[item.index()]
    }

    pub fn groups(&self) -> &[GroupId] {
        &self.groups
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, group: GroupId) -> &str {
        &self.names[group.index()]
    }

    pub fn group_by_name(&self, name: &str) -> Option<GroupId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| GroupId(i as u16))
    }

    /// Number of items carrying each group label.
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_groups()];
        for g in &self.groups {
            sizes[g.index()] += 1;
        }
        sizes
    }

    pub fn histogram(&self, items: &[ItemId]) -> Vec<usize> {
        let mut counts = vec![0; self.n_groups()];
        for &i in items {
            counts[self.group_of(i).index()] += 1;
        }
        counts
    }
}

/// Ordered list of distinct items.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<ItemId>", into = "Vec<ItemId>")]
pub struct RecList {
    items: Vec<ItemId>,
}

impl RecList {
    pub fn new(items: Vec<ItemId>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(items.len());
        for &i in &items {
            if !seen.insert(i) {
                return Err(Error::InvalidInput(format!(
                    "item {i} appears twice in a recommendation list"
                )));
            }
        }
        Ok(RecList { items })
    }

    pub fn empty() -> Self {
        RecList::default()
    }

    pub(crate) fn push_unchecked(&mut self, item: ItemId) {
        debug_assert!(!self.items.contains(&item));
        self.items.push(item);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.items.contains(&item)
    }

    pub fn as_slice(&self) -> &[ItemId] {
        &self.items
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = ItemId> + ExactSizeIterator + '_ {
        self.items.iter().copied()
    }

    pub fn into_vec(self) -> Vec<ItemId> {
        self.items
    }

    /// 1-based rank of `item`, if present.
    pub fn rank_of(&self, item: ItemId) -> Option<usize> {
        self.items.iter().position(|&i| i == item).map(|p| p + 1)
    }
}

impl TryFrom<Vec<ItemId>> for RecList {
    type Error = Error;

    fn try_from(items: Vec<ItemId>) -> Result<Self> {
        RecList::new(items)
    }
}

impl From<RecList> for Vec<ItemId> {
    fn from(list: RecList) -> Self {
        list.items
    }
}

impl<'a> IntoIterator for &'a RecList {
    type Item = ItemId;
    type IntoIter = std::iter::Copied<std::slice::Iter<'a, ItemId>>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter().copied()
    }
}

/// List length `k` and per-group minimum `tau`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairnessParams {
    k: usize,
    tau: usize,
}

impl FairnessParams {
    /// Validates `tau * |groups| <= k` and that every group has at least `tau`
    /// items in the universe described by `attrs`.
    pub fn new(k: usize, tau: usize, attrs: &AttributeTable) -> Result<Self> {
        if k == 0 {
            return Err(Error::Constraint("K must be positive".into()));
        }
        let groups = attrs.n_groups();
        if tau * groups > k {
            return Err(Error::Constraint(format!(
                "tau = {tau} exceeds K / |groups| = {k} / {groups}"
            )));
        }
        for (g, size) in attrs.group_sizes().into_iter().enumerate() {
            if size < tau {
                return Err(Error::Constraint(format!(
                    "group {:?} has {size} items, fewer than tau = {tau}",
                    attrs.names()[g]
                )));
            }
        }
        Ok(FairnessParams { k, tau })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tau(&self) -> usize {
        self.tau
    }
}

/// Per-group counts of the items currently in a list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupLedger {
    counts: Vec<usize>,
    total: usize,
}

impl GroupLedger {
    pub fn new(n_groups: usize) -> Self {
        GroupLedger {
            counts: vec![0; n_groups],
            total: 0,
        }
    }

    pub fn from_counts(counts: Vec<usize>) -> Self {
        let total = counts.iter().sum();
        GroupLedger { counts, total }
    }

    pub fn record(&mut self, group: GroupId) {
        self.counts[group.index()] += 1;
        self.total += 1;
    }

    pub fn count(&self, group: GroupId) -> usize {
        self.counts[group.index()]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Sum over groups (skipping `exclude`) of `max(0, tau - count)`.
    pub fn deficit(&self, tau: usize, exclude: Option<GroupId>) -> usize {
        self.counts
            .iter()
            .enumerate()
            .filter(|&(g, _)| exclude.is_none_or(|e| e.index() != g))
            .map(|(_, &c)| tau.saturating_sub(c))
            .sum()
    }

    /// Whether an item of `group` can be appended without making the
    /// per-group minimum unreachable for the remaining slots.
    ///
    /// The slots left after the append must cover the deficit of every other
    /// group: `deficit(tau, exclude = group) <= K - len - 1`.
    pub fn can_add(&self, group: GroupId, params: &FairnessParams) -> Result<bool> {
        if self.total >= params.k() {
            return Err(Error::ListFull { k: params.k() });
        }
        Ok(self.deficit(params.tau(), Some(group)) < params.k() - self.total)
    }
}

/// Exact rational in `[0, 1]`, compared by cross-multiplication.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "zero denominator");
        Ratio { num, den }
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ratio {}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Smallest share of any group in `list`; groups absent from the list count as zero.
pub fn least_ratio(list: &RecList, attrs: &AttributeTable) -> Result<Ratio> {
    if list.is_empty() {
        return Err(Error::Empty("least ratio of an empty list".into()));
    }
    let min = attrs
        .histogram(list.as_slice())
        .into_iter()
        .min()
        .unwrap_or(0);
    Ok(Ratio::new(min as u64, list.len() as u64))
}

/// Base-2 Shannon entropy of the group proportions in `list`.
pub fn list_entropy(list: &RecList, attrs: &AttributeTable) -> Result<f64> {
    if list.is_empty() {
        return Err(Error::Empty("entropy of an empty list".into()));
    }
    let len = list.len() as f64;
    Ok(attrs
        .histogram(list.as_slice())
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / len;
            -p * p.log2()
        })
        .sum())
}

/// Incrementally builds a fair list for one source item.
///
/// Rejects the source itself, anything in the history, duplicates, and any
/// item whose group would make the per-group minimum unreachable.
pub struct FairListBuilder<'a> {
    attrs: &'a AttributeTable,
    params: FairnessParams,
    source: ItemId,
    history: &'a ItemSet,
    list: RecList,
    ledger: GroupLedger,
}

impl<'a> FairListBuilder<'a> {
    pub fn new(
        attrs: &'a AttributeTable,
        params: FairnessParams,
        source: ItemId,
        history: &'a ItemSet,
    ) -> Self {
        FairListBuilder {
            attrs,
            params,
            source,
            history,
            list: RecList::empty(),
            ledger: GroupLedger::new(attrs.n_groups()),
        }
    }

    pub fn is_full(&self) -> bool {
        self.list.len() >= self.params.k()
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    /// Eligible = not the source, not in the history, not already listed.
    pub fn is_eligible(&self, item: ItemId) -> bool {
        item != self.source && !self.history.contains(&item) && !self.list.contains(item)
    }

    /// Whether `item` is eligible and passes the deficit check.
    pub fn accepts(&self, item: ItemId) -> bool {
        !self.is_full()
            && self.is_eligible(item)
            && self
                .ledger
                .can_add(self.attrs.group_of(item), &self.params)
                .unwrap_or(false)
    }

    /// Appends `item` if [`accepts`](Self::accepts) holds; returns whether it did.
    pub fn try_push(&mut self, item: ItemId) -> bool {
        if item.index() >= self.attrs.n_items() || !self.accepts(item) {
            return false;
        }
        self.ledger.record(self.attrs.group_of(item));
        self.list.push_unchecked(item);
        true
    }

    pub fn ledger(&self) -> &GroupLedger {
        &self.ledger
    }

    pub fn list(&self) -> &RecList {
        &self.list
    }

    pub fn finish(self) -> RecList {
        self.list
    }
}

/// Output of a fair recommender for one source item.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Recommendation {
    pub list: RecList,
    /// Per position: whether the item came from the uniform fallback draw.
    pub from_fallback: Vec<bool>,
    /// Fewer than `K` eligible items were left in the universe.
    pub short: bool,
}

impl Recommendation {
    pub fn from_list(list: RecList, k: usize) -> Self {
        let short = list.len() < k;
        Recommendation {
            from_fallback: vec![false; list.len()],
            list,
            short,
        }
    }

    pub fn fallback_count(&self) -> usize {
        self.from_fallback.iter().filter(|&&b| b).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mw(labels: &str) -> (AttributeTable, RecList) {
        let labels: Vec<String> = labels.chars().map(|c| c.to_string()).collect();
        let mut all = labels.clone();
        all.push("M".into());
        all.push("W".into());
        let attrs = AttributeTable::from_labels(&all).unwrap();
        let list = RecList::new((0..labels.len()).map(ItemId::new).collect()).unwrap();
        (attrs, list)
    }

    fn ledger(m: usize, w: usize) -> GroupLedger {
        GroupLedger::from_counts(vec![m, w])
    }

    const M: GroupId = GroupId(0);
    const W: GroupId = GroupId(1);

    #[test]
    fn deficit_examples() {
        assert_eq!(ledger(0, 0).deficit(3, Some(M)), 3);
        assert_eq!(ledger(6, 0).deficit(1, None), 1);
        assert_eq!(ledger(2, 2).deficit(2, None), 0);
    }

    fn params(k: usize, tau: usize) -> FairnessParams {
        let attrs = AttributeTable::from_labels(&["M"; 10].iter().chain(&["W"; 10]).collect::<Vec<_>>()).unwrap();
        FairnessParams::new(k, tau, &attrs).unwrap()
    }

    #[test]
    fn can_add_examples() {
        assert!(ledger(0, 0).can_add(M, &params(6, 0)).unwrap());
        assert!(!ledger(5, 0).can_add(M, &params(6, 1)).unwrap());
        assert!(ledger(5, 0).can_add(W, &params(6, 1)).unwrap());
    }

    #[test]
    fn can_add_rejects_full_list() {
        assert!(matches!(
            ledger(3, 3).can_add(M, &params(6, 1)),
            Err(Error::ListFull { k: 6 })
        ));
    }

    #[test]
    fn literal_count_then_compare_form_is_unsound() {
        // Counting the candidate first and comparing against K - len admits a
        // sixth man; the deficit-over-other-groups form does not.
        let after = ledger(6, 0);
        assert!(after.deficit(1, None) <= 6 - 5);
        assert!(!ledger(5, 0).can_add(M, &params(6, 1)).unwrap());
    }

    #[test]
    fn least_ratio_examples() {
        let (a, l) = mw("MMMMWM");
        assert_eq!(least_ratio(&l, &a).unwrap(), Ratio::new(1, 6));
        let (a, l) = mw("WWW");
        assert_eq!(least_ratio(&l, &a).unwrap(), Ratio::new(0, 3));
        let (a, l) = mw("MWMW");
        assert_eq!(least_ratio(&l, &a).unwrap(), Ratio::new(1, 2));
    }

    #[test]
    fn entropy_examples() {
        let (a, l) = mw("MMMMWM");
        assert!((list_entropy(&l, &a).unwrap() - 0.650).abs() < 1e-3);
        let (a, l) = mw("MMM");
        assert_eq!(list_entropy(&l, &a).unwrap(), 0.0);
        let (a, l) = mw("MWMW");
        assert!((list_entropy(&l, &a).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_list_rejected() {
        let (a, _) = mw("");
        assert!(least_ratio(&RecList::empty(), &a).is_err());
        assert!(list_entropy(&RecList::empty(), &a).is_err());
    }

    #[test]
    fn duplicate_items_rejected() {
        assert!(RecList::new(vec![ItemId(1), ItemId(1)]).is_err());
    }

    #[test]
    fn params_validation() {
        let attrs = AttributeTable::from_labels(&["M", "M", "M", "W"]).unwrap();
        assert!(FairnessParams::new(10, 6, &attrs).is_err());
        // only one W in the universe
        assert!(FairnessParams::new(4, 2, &attrs).is_err());
        assert!(FairnessParams::new(4, 1, &attrs).is_ok());
    }

    #[test]
    fn rank_discount_values() {
        assert_eq!(rank_discount(1), 1.0);
        assert_eq!(rank_discount(3), 0.5);
        assert!((rank_discount(2) - 0.630_929_753_571_457_4).abs() < 1e-15);
    }
}
