//! CascadeUCB1 and PBM-UCB behind a common [`Ranker`] interface.
//!
//! Both learners start at round `t = 1`. At the start of round `t` they score
//! every item with `ln t` and the counters accumulated through round `t - 1`,
//! recommend the K highest scores (ties to the smaller item id), and then
//! advance `t` when [`Ranker::update`] consumes that round's feedback.

use crate::error::{Error, Result};
use crate::types::{FeedbackRound, ItemId, PositionBias, RankedList};

/// `ŵ + sqrt(α ln t / N)`.
pub fn ucb_cascade(w_hat: f64, examinations: u64, t: u64, alpha: f64) -> Result<f64> {
    if examinations == 0 {
        return Err(Error::InvalidParameter("examination count N must be >= 1".into()));
    }
    if t == 0 {
        return Err(Error::InvalidParameter("round t must be >= 1".into()));
    }
    Ok(cascade_index(w_hat, examinations, (t as f64).ln(), alpha))
}

#[inline]
fn cascade_index(w_hat: f64, examinations: u64, ln_t: f64, alpha: f64) -> f64 {
    w_hat + (alpha * ln_t / examinations as f64).sqrt()
}

/// `S/Ñ + sqrt(α n ln t / Ñ²)`, or `+∞` for an item never placed (`Ñ = 0`).
pub fn ucb_pbm(clicks: u64, recommendations: u64, exam_estimate: f64, t: u64, alpha: f64) -> f64 {
    pbm_index(clicks, recommendations, exam_estimate, (t as f64).ln(), alpha)
}

#[inline]
fn pbm_index(clicks: u64, recommendations: u64, exam_estimate: f64, ln_t: f64, alpha: f64) -> f64 {
    if exam_estimate <= 0.0 {
        return f64::INFINITY;
    }
    clicks as f64 / exam_estimate + (alpha * recommendations as f64 * ln_t / (exam_estimate * exam_estimate)).sqrt()
}

/// The `k` highest-scoring items in descending score order; equal scores go
/// to the smaller item id.
pub fn top_k(scores: &[f64], k: usize) -> RankedList {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    RankedList::from_unchecked(order.into_iter().take(k).map(ItemId::from_index).collect())
}

/// One row of a per-item state dump.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemState {
    pub item: ItemId,
    /// `N_a` (CascadeUCB1) or `n_a` (PBM-UCB), including the initial pseudo-count.
    pub count: u64,
    pub clicks: u64,
    /// `Ñ_a`; `None` for CascadeUCB1.
    pub exam_estimate: Option<f64>,
    /// `ŵ_a` for CascadeUCB1, `S_a / Ñ_a` for PBM-UCB (0 when `Ñ_a = 0`).
    pub mean: f64,
    pub ucb: f64,
}

pub trait Ranker: Send {
    fn name(&self) -> &'static str;

    /// Number of items `L`.
    fn num_items(&self) -> usize;

    /// List length `K`.
    fn list_len(&self) -> usize;

    /// The round about to be played.
    fn round(&self) -> u64;

    /// UCB of every item (indexed by `item.index()`) for the current round.
    fn ucb_values(&self) -> Vec<f64>;

    fn recommend(&self) -> RankedList {
        top_k(&self.ucb_values(), self.list_len())
    }

    /// Consumes the (possibly manipulated) feedback for `list` and advances
    /// to the next round. Items absent from `list` are untouched.
    fn update(&mut self, list: &RankedList, feedback: &FeedbackRound) -> Result<()>;

    fn state(&self) -> Vec<ItemState>;
}

fn check_round_input(k: usize, list: &RankedList, feedback: &FeedbackRound) -> Result<()> {
    if list.len() != k {
        return Err(Error::InvalidFeedback(format!(
            "list of length {} for K = {k}",
            list.len()
        )));
    }
    feedback.check(k)
}

/// CascadeUCB1 with the initialization `N_a = 1`, `ŵ_a = 0`.
///
/// `ŵ_a` is kept as `clicks_a / N_a`, which is the running mean
/// `(ŵ N_old + r) / N_new` evaluated without accumulated rounding.
#[derive(Debug, Clone)]
pub struct CascadeUcb1 {
    alpha: f64,
    k: usize,
    examinations: Vec<u64>,
    clicks: Vec<u64>,
    t: u64,
}

impl CascadeUcb1 {
    pub fn new(num_items: usize, k: usize, alpha: f64) -> Result<Self> {
        check_shape(num_items, k, alpha)?;
        Ok(Self {
            alpha,
            k,
            examinations: vec![1; num_items],
            clicks: vec![0; num_items],
            t: 1,
        })
    }

    pub fn examinations(&self, item: ItemId) -> u64 {
        self.examinations[item.index()]
    }

    pub fn clicks(&self, item: ItemId) -> u64 {
        self.clicks[item.index()]
    }

    pub fn w_hat(&self, item: ItemId) -> f64 {
        let i = item.index();
        self.clicks[i] as f64 / self.examinations[i] as f64
    }
}

fn check_shape(num_items: usize, k: usize, alpha: f64) -> Result<()> {
    if k == 0 {
        return Err(Error::ZeroK);
    }
    if k > num_items {
        return Err(Error::KExceedsL { k, l: num_items });
    }
    if alpha.is_nan() || alpha <= 1.0 {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must exceed 1")));
    }
    Ok(())
}

impl Ranker for CascadeUcb1 {
    fn name(&self) -> &'static str {
        "cascade-ucb1"
    }

    fn num_items(&self) -> usize {
        self.examinations.len()
    }

    fn list_len(&self) -> usize {
        self.k
    }

    fn round(&self) -> u64 {
        self.t
    }

    fn ucb_values(&self) -> Vec<f64> {
        let ln_t = (self.t as f64).ln();
        self.examinations
            .iter()
            .zip(&self.clicks)
            .map(|(&n, &s)| cascade_index(s as f64 / n as f64, n, ln_t, self.alpha))
            .collect()
    }

    fn update(&mut self, list: &RankedList, feedback: &FeedbackRound) -> Result<()> {
        check_round_input(self.k, list, feedback)?;
        for (pos, &item) in list.items().iter().enumerate() {
            if feedback.exam[pos] {
                let i = item.index();
                self.examinations[i] += 1;
                self.clicks[i] += feedback.clicks[pos] as u64;
            }
        }
        self.t += 1;
        Ok(())
    }

    fn state(&self) -> Vec<ItemState> {
        let ucb = self.ucb_values();
        (0..self.num_items())
            .map(|i| {
                let item = ItemId::from_index(i);
                ItemState {
                    item,
                    count: self.examinations[i],
                    clicks: self.clicks[i],
                    exam_estimate: None,
                    mean: self.w_hat(item),
                    ucb: ucb[i],
                }
            })
            .collect()
    }
}

/// PBM-UCB with the initialization `n_a = 1`, `S_a = 0`.
///
/// The initial `n_a = 1` is a pseudo-count: `Ñ_a` only sums the bias of
/// positions the item actually occupied, so it starts at 0.
#[derive(Debug, Clone)]
pub struct PbmUcb {
    alpha: f64,
    bias: PositionBias,
    recommendations: Vec<u64>,
    clicks: Vec<u64>,
    exam_estimate: Vec<f64>,
    t: u64,
}

impl PbmUcb {
    pub fn new(num_items: usize, bias: PositionBias, alpha: f64) -> Result<Self> {
        check_shape(num_items, bias.len(), alpha)?;
        Ok(Self {
            alpha,
            bias,
            recommendations: vec![1; num_items],
            clicks: vec![0; num_items],
            exam_estimate: vec![0.0; num_items],
            t: 1,
        })
    }

    pub fn recommendations(&self, item: ItemId) -> u64 {
        self.recommendations[item.index()]
    }

    pub fn clicks(&self, item: ItemId) -> u64 {
        self.clicks[item.index()]
    }

    pub fn exam_estimate(&self, item: ItemId) -> f64 {
        self.exam_estimate[item.index()]
    }

    pub fn bias(&self) -> &PositionBias {
        &self.bias
    }
}

impl Ranker for PbmUcb {
    fn name(&self) -> &'static str {
        "pbm-ucb"
    }

    fn num_items(&self) -> usize {
        self.recommendations.len()
    }

    fn list_len(&self) -> usize {
        self.bias.len()
    }

    fn round(&self) -> u64 {
        self.t
    }

    fn ucb_values(&self) -> Vec<f64> {
        let ln_t = (self.t as f64).ln();
        (0..self.num_items())
            .map(|i| {
                pbm_index(
                    self.clicks[i],
                    self.recommendations[i],
                    self.exam_estimate[i],
                    ln_t,
                    self.alpha,
                )
            })
            .collect()
    }

    fn update(&mut self, list: &RankedList, feedback: &FeedbackRound) -> Result<()> {
        check_round_input(self.bias.len(), list, feedback)?;
        for (pos, &item) in list.items().iter().enumerate() {
            let i = item.index();
            self.recommendations[i] += 1;
            self.clicks[i] += feedback.clicks[pos] as u64;
            self.exam_estimate[i] += self.bias.at(pos + 1);
        }
        self.t += 1;
        Ok(())
    }

    fn state(&self) -> Vec<ItemState> {
        let ucb = self.ucb_values();
        (0..self.num_items())
            .map(|i| {
                let n_tilde = self.exam_estimate[i];
                ItemState {
                    item: ItemId::from_index(i),
                    count: self.recommendations[i],
                    clicks: self.clicks[i],
                    exam_estimate: Some(n_tilde),
                    mean: if n_tilde > 0.0 {
                        self.clicks[i] as f64 / n_tilde
                    } else {
                        0.0
                    },
                    ucb: ucb[i],
                }
            })
            .collect()
    }
}
