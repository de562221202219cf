//! Observation-free attacks on CascadeUCB1 and PBM-UCB, plus the
//! attack-then-quit baselines.
//!
//! An observation-free attack runs in three phases. For the first `T1` rounds
//! the adversary reports zero reward for everything. For the next `T2`
//! rounds it rewards only members of the target list `Λ`. Afterwards the true
//! user feedback passes through untouched. The phase lengths are fixed up
//! front from `(α, T, K, L, w_m)` and, for the position-based model, the
//! examination bias.
//!
//! Transforms return `None` for pass-through rounds and `Some(feedback)` for
//! rounds whose feedback the adversary dictates.

use serde::{Deserialize, Serialize};

use crate::click_models::cascade_synthesize;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::types::{FeedbackRound, ItemId, PositionBias, RankedList};

/// Items to promote (`S`) and the length-K list `Λ ⊇ S` the attack drives the
/// learner towards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    targets: Vec<ItemId>,
    target_list: Vec<ItemId>,
}

impl TargetSpec {
    /// Pads `targets` up to `k` entries with the smallest-id non-targets.
    pub fn new(targets: Vec<ItemId>, k: usize, l: usize) -> Result<Self> {
        check_items(&targets, l)?;
        if targets.is_empty() {
            return Err(Error::InvalidTargets("empty target set".into()));
        }
        if targets.len() > k {
            return Err(Error::InvalidTargets(format!(
                "{} targets exceed K = {k}",
                targets.len()
            )));
        }
        let mut target_list = targets.clone();
        target_list.extend(
            (0..l)
                .map(ItemId::from_index)
                .filter(|a| !targets.contains(a))
                .take(k - targets.len()),
        );
        Ok(Self { targets, target_list })
    }

    /// Explicit `Λ`; it must contain every target and have length `k`.
    pub fn with_list(targets: Vec<ItemId>, target_list: Vec<ItemId>, k: usize, l: usize) -> Result<Self> {
        check_items(&targets, l)?;
        check_items(&target_list, l)?;
        if targets.is_empty() {
            return Err(Error::InvalidTargets("empty target set".into()));
        }
        if target_list.len() != k {
            return Err(Error::InvalidTargets(format!(
                "target list has {} entries, K = {k}",
                target_list.len()
            )));
        }
        if let Some(a) = targets.iter().find(|a| !target_list.contains(a)) {
            return Err(Error::InvalidTargets(format!(
                "target {a} missing from the target list"
            )));
        }
        Ok(Self { targets, target_list })
    }

    pub fn from_ids(ids: &[u32], k: usize, l: usize) -> Result<Self> {
        Self::new(ids.iter().map(|&i| ItemId(i)).collect(), k, l)
    }

    /// The target set `S`.
    pub fn targets(&self) -> &[ItemId] {
        &self.targets
    }

    /// The target list `Λ`.
    pub fn target_list(&self) -> &[ItemId] {
        &self.target_list
    }

    pub fn is_target(&self, item: ItemId) -> bool {
        self.targets.contains(&item)
    }

    pub fn in_target_list(&self, item: ItemId) -> bool {
        self.target_list.contains(&item)
    }

    /// Checks the targets against a universe of `l` items and lists of length `k`.
    pub fn validate(&self, k: usize, l: usize) -> Result<()> {
        Self::with_list(self.targets.clone(), self.target_list.clone(), k, l).map(|_| ())
    }
}

fn check_items(items: &[ItemId], l: usize) -> Result<()> {
    for (i, &a) in items.iter().enumerate() {
        if a.0 == 0 || a.0 as usize > l {
            return Err(Error::UnknownItem { item: a.0, l });
        }
        if items[..i].contains(&a) {
            return Err(Error::DuplicateItem(a.0));
        }
    }
    Ok(())
}

/// `w_m = (1 - ε) min{1/K, w_min}`.
pub fn derive_wm_cascade(w_min: f64, k: usize, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} not in (0, 1)")));
    }
    if !(w_min > 0.0 && w_min <= 1.0) {
        return Err(Error::InvalidParameter(format!("w_min = {w_min} not in (0, 1]")));
    }
    if k == 0 {
        return Err(Error::ZeroK);
    }
    Ok((1.0 - epsilon) * (1.0 / k as f64).min(w_min))
}

fn check_common(alpha: f64, horizon: u64, k: usize, l: usize, w_m: f64) -> Result<()> {
    if alpha.is_nan() || alpha <= 1.0 {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must exceed 1")));
    }
    if horizon < 3 {
        return Err(Error::InvalidParameter(format!("horizon T = {horizon} must be >= 3")));
    }
    if k == 0 {
        return Err(Error::ZeroK);
    }
    if k > l {
        return Err(Error::KExceedsL { k, l });
    }
    if w_m.is_nan() || w_m <= 0.0 {
        return Err(Error::InvalidParameter(format!("w_m = {w_m} must be positive")));
    }
    Ok(())
}

/// Integer ceiling of a finite, nonnegative real.
fn ceil_u64(x: f64) -> u64 {
    x.ceil() as u64
}

/// Phase lengths of the cascade attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeOfaSchedule {
    pub alpha: f64,
    pub horizon: u64,
    pub k: usize,
    pub l: usize,
    pub w_m: f64,
    pub t1: u64,
    pub t2: u64,
}

impl CascadeOfaSchedule {
    /// Total manipulated rounds `C = T1 + T2`.
    pub fn budget(&self) -> u64 {
        self.t1 + self.t2
    }

    /// Rounds per phase-2 sub-phase, `T2 / K`.
    pub fn sub_phase_len(&self) -> u64 {
        self.t2 / self.k as u64
    }

    /// 1-based sub-phase `⌈K (t - T1) / T2⌉` for a phase-2 round `t`.
    pub fn sub_phase(&self, t: u64) -> usize {
        debug_assert!(t > self.t1 && t <= self.budget());
        let k = self.k as u64;
        ((k * (t - self.t1)).div_ceil(self.t2)) as usize
    }
}

/// `T1 = L ⌈α ln T / (K w_m²)⌉`,
/// `T2 = K ⌈(w_m K T1 / L + L - K + 1) / (1 - K w_m)⌉`.
pub fn cascade_ofa_params(alpha: f64, horizon: u64, k: usize, l: usize, w_m: f64) -> Result<CascadeOfaSchedule> {
    check_common(alpha, horizon, k, l, w_m)?;
    let kf = k as f64;
    let lf = l as f64;
    let denominator = 1.0 - kf * w_m;
    if denominator.is_nan() || denominator <= 0.0 {
        return Err(Error::NonPositiveDenominator(denominator));
    }
    let ln_t = (horizon as f64).ln();
    let t1 = l as u64 * ceil_u64(alpha * ln_t / (kf * w_m * w_m));
    let t2 = k as u64 * ceil_u64((w_m * kf * t1 as f64 / lf + lf - kf + 1.0) / denominator);
    Ok(CascadeOfaSchedule {
        alpha,
        horizon,
        k,
        l,
        w_m,
        t1,
        t2,
    })
}

/// Phase lengths and derived constants of the position-based attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PbmOfaSchedule {
    pub alpha: f64,
    pub horizon: u64,
    pub k: usize,
    pub l: usize,
    pub w_m: f64,
    pub bias: PositionBias,
    pub lambda_p: f64,
    pub eta: f64,
    pub rho: f64,
    pub gamma: f64,
    pub t1: u64,
    pub t2: u64,
}

impl PbmOfaSchedule {
    pub fn budget(&self) -> u64 {
        self.t1 + self.t2
    }
}

/// Phase lengths reported alongside the reference experiments for
/// `(α, T, K, L, p, w_m) = (1.5, 5·10⁵, 3, 10, (0.95, 0.90, 0.85), 0.08)`.
/// Evaluating the formulas in [`pbm_ofa_params`] gives different values; both
/// are printed by the `params` command.
pub const PBM_REPORTED_T1_T2: (u64, u64) = (11507, 1304);

/// Evaluated in dependency order:
///
/// * `λ_p = p_1 / p_K`
/// * `T1 = ⌈(L/K)(λ_p² α ln T / (w_m² p_K²) + 1)⌉`
/// * `ρ = p_1 w_m (K T1 / ln T - (L - 1) α / (w_m² p_K²))`
/// * `η = p_K - p_1 w_m`
/// * `γ = (2ρη + 1 + sqrt(4ρη + 1)) / (2η²)`
/// * `T2 = ⌈L (λ_p² γ ln T + 1) / K⌉`
pub fn pbm_ofa_params(
    alpha: f64,
    horizon: u64,
    k: usize,
    l: usize,
    bias: &PositionBias,
    w_m: f64,
) -> Result<PbmOfaSchedule> {
    check_common(alpha, horizon, k, l, w_m)?;
    if bias.len() != k {
        return Err(Error::InvalidBias(format!("{} positions for K = {k}", bias.len())));
    }
    if w_m >= 1.0 {
        return Err(Error::InvalidParameter(format!("w_m = {w_m} must be below 1")));
    }
    let kf = k as f64;
    let lf = l as f64;
    let p1 = bias.first();
    let pk = bias.last();
    let lambda_p = p1 / pk;
    let eta = pk - p1 * w_m;
    if eta.is_nan() || eta <= 0.0 {
        return Err(Error::NonPositiveEta(eta));
    }
    let ln_t = (horizon as f64).ln();
    let wm2_pk2 = w_m * w_m * pk * pk;
    let t1 = ceil_u64(lf / kf * (lambda_p * lambda_p * alpha * ln_t / wm2_pk2 + 1.0));
    let rho = p1 * w_m * (kf * t1 as f64 / ln_t - (lf - 1.0) * alpha / wm2_pk2);
    let discriminant = 4.0 * rho * eta + 1.0;
    if discriminant < 0.0 {
        return Err(Error::NegativeDiscriminant(discriminant));
    }
    let gamma = (2.0 * rho * eta + 1.0 + discriminant.sqrt()) / (2.0 * eta * eta);
    let t2 = ceil_u64(lf * (lambda_p * lambda_p * gamma * ln_t + 1.0) / kf);
    Ok(PbmOfaSchedule {
        alpha,
        horizon,
        k,
        l,
        w_m,
        bias: bias.clone(),
        lambda_p,
        eta,
        rho,
        gamma,
        t1,
        t2,
    })
}

fn all_examined_no_click(k: usize) -> FeedbackRound {
    FeedbackRound {
        exam: vec![true; k],
        clicks: vec![false; k],
        manipulated: true,
    }
}

fn cascade_click_at(k: usize, position: Option<usize>) -> FeedbackRound {
    cascade_synthesize(k, position).expect("position comes from the list itself")
}

/// Phase 1: every listed item examined and ignored. Phase 2, sub-phase `i`:
/// `Λ[i]` is clicked if listed (items below it unexamined), otherwise the
/// whole list is examined and ignored. Phase 3: pass-through.
pub fn cascade_ofa_transform(
    schedule: &CascadeOfaSchedule,
    targets: &TargetSpec,
    t: u64,
    list: &RankedList,
) -> Option<FeedbackRound> {
    let k = list.len();
    if t <= schedule.t1 {
        Some(all_examined_no_click(k))
    } else if t <= schedule.budget() {
        let promoted = targets.target_list()[schedule.sub_phase(t) - 1];
        Some(cascade_click_at(k, list.position_of(promoted)))
    } else {
        None
    }
}

/// Adversarial examination `X̂_i ~ Bernoulli(p_i)`, one draw per position in
/// order.
fn adversarial_exam(bias: &PositionBias, k: usize, rng: &mut RngStream) -> Vec<bool> {
    (1..=k).map(|pos| rng.bernoulli(bias.at(pos))).collect()
}

/// Reward 1 for each listed member of `Λ` whose position was examined.
fn pbm_reward_targets(exam: Vec<bool>, targets: &TargetSpec, list: &RankedList) -> FeedbackRound {
    let clicks = list
        .items()
        .iter()
        .zip(&exam)
        .map(|(&a, &x)| x && targets.in_target_list(a))
        .collect();
    FeedbackRound {
        exam,
        clicks,
        manipulated: true,
    }
}

/// Every attack round draws a fresh `X̂`. Phase 1 rewards nothing; phase 2
/// rewards listed members of `Λ` at examined positions; phase 3 passes
/// through without drawing.
pub fn pbm_ofa_transform(
    schedule: &PbmOfaSchedule,
    targets: &TargetSpec,
    t: u64,
    list: &RankedList,
    rng: &mut RngStream,
) -> Option<FeedbackRound> {
    if t > schedule.budget() {
        return None;
    }
    let k = list.len();
    let exam = adversarial_exam(&schedule.bias, k, rng);
    if t <= schedule.t1 {
        Some(FeedbackRound {
            exam,
            clicks: vec![false; k],
            manipulated: true,
        })
    } else {
        Some(pbm_reward_targets(exam, targets, list))
    }
}

/// For `t <= budget`, click the top-most listed target (or ignore the whole
/// list); afterwards pass through.
pub fn cascade_atq_transform(budget: u64, targets: &TargetSpec, t: u64, list: &RankedList) -> Option<FeedbackRound> {
    if t > budget {
        return None;
    }
    let top_target = list.items().iter().position(|&a| targets.is_target(a)).map(|i| i + 1);
    Some(cascade_click_at(list.len(), top_target))
}

/// For `t <= budget`, click every listed member of `Λ` at an adversarially
/// examined position; afterwards pass through.
pub fn pbm_atq_transform(
    budget: u64,
    targets: &TargetSpec,
    bias: &PositionBias,
    t: u64,
    list: &RankedList,
    rng: &mut RngStream,
) -> Option<FeedbackRound> {
    if t > budget {
        return None;
    }
    let exam = adversarial_exam(bias, list.len(), rng);
    Some(pbm_reward_targets(exam, targets, list))
}

/// A configured adversary.
#[derive(Debug, Clone, PartialEq)]
pub enum Attack {
    None,
    CascadeOfa {
        schedule: CascadeOfaSchedule,
        targets: TargetSpec,
    },
    PbmOfa {
        schedule: PbmOfaSchedule,
        targets: TargetSpec,
    },
    CascadeAtq {
        budget: u64,
        targets: TargetSpec,
    },
    PbmAtq {
        budget: u64,
        targets: TargetSpec,
        bias: PositionBias,
    },
}

impl Attack {
    pub fn name(&self) -> &'static str {
        match self {
            Attack::None => "none",
            Attack::CascadeOfa { .. } => "cascade-ofa",
            Attack::PbmOfa { .. } => "pbm-ofa",
            Attack::CascadeAtq { .. } => "cascade-atq",
            Attack::PbmAtq { .. } => "pbm-atq",
        }
    }

    /// Number of rounds the adversary rewrites.
    pub fn budget(&self) -> u64 {
        match self {
            Attack::None => 0,
            Attack::CascadeOfa { schedule, .. } => schedule.budget(),
            Attack::PbmOfa { schedule, .. } => schedule.budget(),
            Attack::CascadeAtq { budget, .. } | Attack::PbmAtq { budget, .. } => *budget,
        }
    }

    pub fn targets(&self) -> Option<&TargetSpec> {
        match self {
            Attack::None => None,
            Attack::CascadeOfa { targets, .. }
            | Attack::PbmOfa { targets, .. }
            | Attack::CascadeAtq { targets, .. }
            | Attack::PbmAtq { targets, .. } => Some(targets),
        }
    }

    pub fn is_observation_free(&self) -> bool {
        matches!(self, Attack::CascadeOfa { .. } | Attack::PbmOfa { .. })
    }

    /// Adversary feedback for round `t`, or `None` to use the true feedback.
    pub fn transform(&self, t: u64, list: &RankedList, rng: &mut RngStream) -> Option<FeedbackRound> {
        match self {
            Attack::None => None,
            Attack::CascadeOfa { schedule, targets } => cascade_ofa_transform(schedule, targets, t, list),
            Attack::PbmOfa { schedule, targets } => pbm_ofa_transform(schedule, targets, t, list, rng),
            Attack::CascadeAtq { budget, targets } => cascade_atq_transform(*budget, targets, t, list),
            Attack::PbmAtq { budget, targets, bias } => pbm_atq_transform(*budget, targets, bias, t, list, rng),
        }
    }
}
