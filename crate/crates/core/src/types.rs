//! Domain types shared by every module: items, attraction profiles, ranked
//! lists, position bias and per-round feedback.
//!
//! Item identifiers are 1-based everywhere they leave this crate (logs, CSVs,
//! configuration). Internally an item's slot in per-item vectors is
//! `item.index()`, i.e. `id - 1`.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1-based item identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u32);

impl ItemId {
    /// Identifier for the 0-based slot `index`.
    pub fn from_index(index: usize) -> Self {
        ItemId(index as u32 + 1)
    }

    /// 0-based slot in per-item vectors.
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The item universe `1..=L` with one attraction probability per item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractionProfile {
    w: Vec<f64>,
    /// External identifiers (e.g. MovieLens movie ids) the items were derived from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_ids: Option<Vec<u64>>,
}

impl AttractionProfile {
    /// Profile whose item `i` (1-based) has attraction `w[i - 1]`.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        check_probabilities(&w)?;
        Ok(Self { w, source_ids: None })
    }

    /// Builds a profile from explicit `(item, w)` pairs. The ids must be
    /// exactly `1..=L` in some order.
    pub fn from_pairs(pairs: &[(ItemId, f64)]) -> Result<Self> {
        let l = pairs.len();
        let mut w = vec![f64::NAN; l];
        let mut seen = HashSet::with_capacity(l);
        for &(item, value) in pairs {
            if !seen.insert(item) {
                return Err(Error::DuplicateItem(item.0));
            }
            if item.0 == 0 || item.0 as usize > l {
                return Err(Error::UnknownItem { item: item.0, l });
            }
            w[item.index()] = value;
        }
        Self::new(w)
    }

    pub fn with_source_ids(mut self, ids: Vec<u64>) -> Result<Self> {
        if ids.len() != self.w.len() {
            return Err(Error::InvalidParameter(format!(
                "{} source ids for {} items",
                ids.len(),
                self.w.len()
            )));
        }
        self.source_ids = Some(ids);
        Ok(self)
    }

    /// Number of items `L`.
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    #[inline]
    pub fn w(&self, item: ItemId) -> f64 {
        self.w[item.index()]
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn source_ids(&self) -> Option<&[u64]> {
        self.source_ids.as_deref()
    }

    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        (0..self.w.len()).map(ItemId::from_index)
    }

    /// Whether `w` is nonincreasing in item order, so that `(1..=K)` is optimal.
    pub fn is_sorted(&self) -> bool {
        self.w.windows(2).all(|p| p[0] >= p[1])
    }

    /// Smallest attraction among `items`.
    pub fn min_over(&self, items: &[ItemId]) -> f64 {
        items.iter().map(|&a| self.w(a)).fold(f64::INFINITY, f64::min)
    }

    /// The ten-movie MovieLens-derived profile used for the reference experiments.
    pub fn appendix_d() -> Self {
        Self {
            w: APPENDIX_D_W.to_vec(),
            source_ids: None,
        }
    }

    /// Looks up a built-in profile by name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "appendix-d" => Some(Self::appendix_d()),
            _ => None,
        }
    }
}

/// Attraction probabilities of the reference ten-item universe.
pub const APPENDIX_D_W: [f64; 10] = [0.336, 0.204, 0.163, 0.125, 0.112, 0.105, 0.099, 0.090, 0.086, 0.082];

fn check_probabilities(w: &[f64]) -> Result<()> {
    for (i, &value) in w.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::ProbabilityOutOfRange {
                item: i as u32 + 1,
                value,
            });
        }
    }
    Ok(())
}

/// Checks a profile against a list length `k`: every `w` in `[0, 1]`,
/// `1 <= K <= L`. Returns the profile unchanged.
pub fn validate_profile(profile: AttractionProfile, k: usize) -> Result<AttractionProfile> {
    check_probabilities(&profile.w)?;
    if k == 0 {
        return Err(Error::ZeroK);
    }
    if k > profile.len() {
        return Err(Error::KExceedsL { k, l: profile.len() });
    }
    Ok(profile)
}

/// The `k` items with the largest attraction, in descending order; ties go to
/// the smaller identifier.
pub fn optimal_list(profile: &AttractionProfile, k: usize) -> RankedList {
    let mut items: Vec<ItemId> = profile.items().collect();
    items.sort_by(|&a, &b| profile.w(b).total_cmp(&profile.w(a)).then_with(|| a.cmp(&b)));
    items.truncate(k);
    RankedList(items)
}

/// An ordered recommendation; position 1 is the top.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankedList(Vec<ItemId>);

impl RankedList {
    /// Validating constructor: entries distinct and drawn from `1..=l`.
    pub fn new(items: Vec<ItemId>, l: usize) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::ZeroK);
        }
        let mut seen = HashSet::with_capacity(items.len());
        for &item in &items {
            if item.0 == 0 || item.0 as usize > l {
                return Err(Error::UnknownItem { item: item.0, l });
            }
            if !seen.insert(item) {
                return Err(Error::InvalidList(format!("item {item} listed twice")));
            }
        }
        Ok(Self(items))
    }

    /// Convenience for tests and configuration: raw 1-based ids.
    pub fn from_ids(ids: &[u32], l: usize) -> Result<Self> {
        Self::new(ids.iter().map(|&i| ItemId(i)).collect(), l)
    }

    pub(crate) fn from_unchecked(items: Vec<ItemId>) -> Self {
        Self(items)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn items(&self) -> &[ItemId] {
        &self.0
    }

    /// Item at 1-based `position`.
    pub fn at(&self, position: usize) -> ItemId {
        self.0[position - 1]
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.0.contains(&item)
    }

    /// 1-based position of `item`, if listed.
    pub fn position_of(&self, item: ItemId) -> Option<usize> {
        self.0.iter().position(|&a| a == item).map(|i| i + 1)
    }

    /// Same items regardless of order.
    pub fn is_permutation_of(&self, other: &[ItemId]) -> bool {
        self.0.len() == other.len() && other.iter().all(|a| self.0.contains(a))
    }
}

impl fmt::Display for RankedList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, item) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{item}")?;
        }
        Ok(())
    }
}

/// Per-position examination probabilities of the position-based model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PositionBias(Vec<f64>);

impl PositionBias {
    /// Requires `p_1 >= p_2 >= ... >= p_K`, each in `(0, 1]`.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidBias("empty".into()));
        }
        if let Some(bad) = p.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
            return Err(Error::InvalidBias(format!("{bad} not in (0, 1]")));
        }
        if p.windows(2).any(|q| q[0] < q[1]) {
            return Err(Error::InvalidBias("must be nonincreasing".into()));
        }
        Ok(Self(p))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Examination probability of 1-based `position`.
    #[inline]
    pub fn at(&self, position: usize) -> f64 {
        self.0[position - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn first(&self) -> f64 {
        self.0[0]
    }

    pub fn last(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// `lambda_p = p_1 / p_K`.
    pub fn lambda(&self) -> f64 {
        self.first() / self.last()
    }
}

impl TryFrom<Vec<f64>> for PositionBias {
    type Error = Error;

    fn try_from(p: Vec<f64>) -> Result<Self> {
        Self::new(p)
    }
}

impl From<PositionBias> for Vec<f64> {
    fn from(p: PositionBias) -> Self {
        p.0
    }
}

/// Examination and click vectors for one round, indexed by 0-based position.
///
/// The reward of the item at position `i` is `clicks[i]`: every item occupies
/// exactly one position, so `r_a = sum_i clicks[i] * 1{a = a_i}` reduces to a
/// lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackRound {
    pub exam: Vec<bool>,
    pub clicks: Vec<bool>,
    pub manipulated: bool,
}

impl FeedbackRound {
    pub fn len(&self) -> usize {
        self.exam.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exam.is_empty()
    }

    pub fn click_count(&self) -> usize {
        self.clicks.iter().filter(|&&c| c).count()
    }

    /// Reward of each listed item, in list order.
    pub fn item_rewards<'a>(&'a self, list: &'a RankedList) -> impl Iterator<Item = (ItemId, u8)> + 'a {
        list.items().iter().zip(&self.clicks).map(|(&a, &c)| (a, c as u8))
    }

    /// Reward for `item` under `list`; 0 for unlisted items.
    pub fn reward_of(&self, list: &RankedList, item: ItemId) -> u8 {
        list.position_of(item)
            .map(|pos| self.clicks[pos - 1] as u8)
            .unwrap_or(0)
    }

    /// `clicks[i] => exam[i]`, and both vectors have the list's length.
    pub fn check(&self, k: usize) -> Result<()> {
        if self.exam.len() != k || self.clicks.len() != k {
            return Err(Error::InvalidFeedback(format!(
                "feedback covers {} positions, list has {k}",
                self.exam.len()
            )));
        }
        if let Some(i) = (0..k).find(|&i| self.clicks[i] && !self.exam[i]) {
            return Err(Error::InvalidFeedback(format!(
                "click at unexamined position {}",
                i + 1
            )));
        }
        Ok(())
    }
}
