//! Cascade and position-based user models: feedback simulation, synthetic
//! adversary feedback, and exact expected reward / per-round regret.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::types::{optimal_list, AttractionProfile, FeedbackRound, ItemId, PositionBias, RankedList};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClickModelKind {
    Cascade,
    Pbm { bias: PositionBias },
}

impl ClickModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ClickModelKind::Cascade => "cascade",
            ClickModelKind::Pbm { .. } => "pbm",
        }
    }

    pub fn bias(&self) -> Option<&PositionBias> {
        match self {
            ClickModelKind::Cascade => None,
            ClickModelKind::Pbm { bias } => Some(bias),
        }
    }

    /// The PBM bias must cover exactly `k` positions.
    pub fn validate(&self, k: usize) -> Result<()> {
        match self {
            ClickModelKind::Pbm { bias } if bias.len() != k => {
                Err(Error::InvalidBias(format!("{} positions for K = {k}", bias.len())))
            }
            _ => Ok(()),
        }
    }

    /// Draws true user feedback for `list`.
    pub fn simulate(&self, list: &RankedList, profile: &AttractionProfile, rng: &mut RngStream) -> FeedbackRound {
        match self {
            ClickModelKind::Cascade => cascade_simulate(list, profile, rng),
            ClickModelKind::Pbm { bias } => pbm_simulate(list, profile, bias, rng),
        }
    }
}

/// Top-down scan; the first attractive item is clicked and ends the round.
///
/// Draws are taken lazily, one per examined position, so a round consumes
/// between 1 and K draws.
pub fn cascade_simulate(list: &RankedList, profile: &AttractionProfile, rng: &mut RngStream) -> FeedbackRound {
    let k = list.len();
    let mut exam = vec![false; k];
    let mut clicks = vec![false; k];
    for (i, &item) in list.items().iter().enumerate() {
        exam[i] = true;
        if rng.bernoulli(profile.w(item)) {
            clicks[i] = true;
            break;
        }
    }
    FeedbackRound {
        exam,
        clicks,
        manipulated: false,
    }
}

/// Independent examination per position, then attraction.
///
/// Consumes exactly `2K` draws: all K examinations first, then all K
/// attraction draws, both in position order.
pub fn pbm_simulate(
    list: &RankedList,
    profile: &AttractionProfile,
    bias: &PositionBias,
    rng: &mut RngStream,
) -> FeedbackRound {
    let k = list.len();
    let exam: Vec<bool> = (1..=k).map(|pos| rng.bernoulli(bias.at(pos))).collect();
    let clicks = list
        .items()
        .iter()
        .zip(&exam)
        .map(|(&item, &examined)| {
            let attracted = rng.bernoulli(profile.w(item));
            examined && attracted
        })
        .collect();
    FeedbackRound {
        exam,
        clicks,
        manipulated: false,
    }
}

/// Cascade-consistent feedback dictated by the adversary: a click at
/// 1-based `clicked_position` (positions below it unexamined), or a full scan
/// with no click.
pub fn cascade_synthesize(k: usize, clicked_position: Option<usize>) -> Result<FeedbackRound> {
    let mut exam = vec![true; k];
    let mut clicks = vec![false; k];
    if let Some(j) = clicked_position {
        if j == 0 || j > k {
            return Err(Error::InvalidParameter(format!("click position {j} outside 1..={k}")));
        }
        exam[j..].iter_mut().for_each(|e| *e = false);
        clicks[j - 1] = true;
    }
    Ok(FeedbackRound {
        exam,
        clicks,
        manipulated: true,
    })
}

/// Expected number of clicks `f(list, w)`.
pub fn expected_reward(kind: &ClickModelKind, list: &RankedList, profile: &AttractionProfile) -> f64 {
    match kind {
        ClickModelKind::Cascade => cascade_expected_reward(list.items(), profile),
        ClickModelKind::Pbm { bias } => list
            .items()
            .iter()
            .enumerate()
            .map(|(i, &a)| bias.at(i + 1) * profile.w(a))
            .sum(),
    }
}

/// `1 - prod (1 - w_a)`. The product runs in item-id order so that every
/// permutation of a list yields the same floating-point value.
fn cascade_expected_reward(items: &[ItemId], profile: &AttractionProfile) -> f64 {
    let mut sorted: SmallVec<[ItemId; 8]> = SmallVec::from_slice(items);
    sorted.sort_unstable();
    1.0 - sorted.iter().map(|&a| 1.0 - profile.w(a)).product::<f64>()
}

/// `Δ(list, w) = f(L*, w) - f(list, w)`.
pub fn per_round_regret(kind: &ClickModelKind, list: &RankedList, profile: &AttractionProfile) -> f64 {
    RegretMeter::new(kind, profile, list.len()).regret(list)
}

/// Per-round regret with `f(L*, w)` computed once.
#[derive(Debug, Clone)]
pub struct RegretMeter<'a> {
    kind: &'a ClickModelKind,
    profile: &'a AttractionProfile,
    optimum: f64,
}

impl<'a> RegretMeter<'a> {
    pub fn new(kind: &'a ClickModelKind, profile: &'a AttractionProfile, k: usize) -> Self {
        let optimum = expected_reward(kind, &optimal_list(profile, k), profile);
        Self { kind, profile, optimum }
    }

    pub fn optimum(&self) -> f64 {
        self.optimum
    }

    #[inline]
    pub fn regret(&self, list: &RankedList) -> f64 {
        self.optimum - expected_reward(self.kind, list, self.profile)
    }
}
