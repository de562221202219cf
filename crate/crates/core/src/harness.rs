//! Round loop, replication over seeds and aggregation.
//!
//! One round: the ranker recommends `L_t`; the adversary either dictates the
//! feedback or passes, in which case the user model draws it; the ranker
//! updates on whatever it was shown. Regret is always the expected gap
//! `Δ(L_t, w)` under the true profile, whatever the learner observed.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{cascade_ofa_params, derive_wm_cascade, pbm_ofa_params, Attack, TargetSpec};
use crate::click_models::{ClickModelKind, RegretMeter};
use crate::error::{Error, Result};
use crate::rankers::{CascadeUcb1, PbmUcb, Ranker};
use crate::rng::{run_seed, RngStream, StreamKind};
use crate::types::{validate_profile, AttractionProfile, FeedbackRound, RankedList};

/// Fraction of rounds every target must be listed in for a run to count as a
/// successful promotion.
pub const SUCCESS_FRACTION: f64 = 0.95;

/// Target size of the logarithmic regret-curve grid.
pub const CURVE_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankerKind {
    CascadeUcb1,
    PbmUcb,
}

impl RankerKind {
    pub fn name(self) -> &'static str {
        match self {
            RankerKind::CascadeUcb1 => "cascade-ucb1",
            RankerKind::PbmUcb => "pbm-ucb",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    None,
    CascadeOfa,
    PbmOfa,
    CascadeAtq,
    PbmAtq,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::CascadeOfa => "cascade-ofa",
            AttackKind::PbmOfa => "pbm-ofa",
            AttackKind::CascadeAtq => "cascade-atq",
            AttackKind::PbmAtq => "pbm-atq",
        }
    }

    fn is_cascade(self) -> bool {
        matches!(self, AttackKind::CascadeOfa | AttackKind::CascadeAtq)
    }

    fn is_pbm(self) -> bool {
        matches!(self, AttackKind::PbmOfa | AttackKind::PbmAtq)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: ClickModelKind,
    pub ranker: RankerKind,
    pub attack: AttackKind,
    pub profile: AttractionProfile,
    pub k: usize,
    pub horizon: u64,
    pub alpha: f64,
    pub targets: Option<TargetSpec>,
    /// Attack parameter; required for PBM attacks.
    pub w_m: Option<f64>,
    /// Derives `w_m = (1-ε) min{1/K, w_min}` for cascade attacks when `w_m` is absent.
    pub epsilon: Option<f64>,
    /// Manipulation budget of the ATQ baselines; defaults to the matching OFA budget.
    pub atq_budget: Option<u64>,
    pub runs: usize,
    pub master_seed: u64,
}

impl ExperimentConfig {
    /// No-attack configuration on the given model with the matching ranker.
    pub fn new(model: ClickModelKind, profile: AttractionProfile, k: usize, horizon: u64, alpha: f64) -> Self {
        let ranker = match model {
            ClickModelKind::Cascade => RankerKind::CascadeUcb1,
            ClickModelKind::Pbm { .. } => RankerKind::PbmUcb,
        };
        Self {
            model,
            ranker,
            attack: AttackKind::None,
            profile,
            k,
            horizon,
            alpha,
            targets: None,
            w_m: None,
            epsilon: None,
            atq_budget: None,
            runs: 1,
            master_seed: 0,
        }
    }

    pub fn with_attack(mut self, attack: AttackKind, targets: TargetSpec, w_m: f64) -> Self {
        self.attack = attack;
        self.targets = Some(targets);
        self.w_m = Some(w_m);
        self
    }

    pub fn with_runs(mut self, runs: usize, master_seed: u64) -> Self {
        self.runs = runs;
        self.master_seed = master_seed;
        self
    }

    fn resolve_w_m(&self, targets: &TargetSpec) -> Result<f64> {
        if let Some(w_m) = self.w_m {
            return Ok(w_m);
        }
        match (self.epsilon, self.attack.is_cascade()) {
            (Some(eps), true) => derive_wm_cascade(self.profile.min_over(targets.target_list()), self.k, eps),
            (Some(_), false) => Err(Error::Config(
                "PBM attacks take w_m directly; epsilon is only defined for cascade attacks".into(),
            )),
            (None, _) => Err(Error::Config(format!("attack {} requires w_m", self.attack.name()))),
        }
    }

    /// Validates the configuration and builds the adversary it describes.
    pub fn build_attack(&self) -> Result<Attack> {
        let profile = validate_profile(self.profile.clone(), self.k)?;
        let l = profile.len();
        self.model.validate(self.k)?;
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        match (self.ranker, &self.model) {
            (RankerKind::CascadeUcb1, ClickModelKind::Cascade) | (RankerKind::PbmUcb, ClickModelKind::Pbm { .. }) => {}
            _ => {
                return Err(Error::Config(format!(
                    "ranker {} does not match the {} model",
                    self.ranker.name(),
                    self.model.name()
                )))
            }
        }
        if (self.attack.is_cascade() && self.model != ClickModelKind::Cascade)
            || (self.attack.is_pbm() && self.model.bias().is_none())
        {
            return Err(Error::Config(format!(
                "attack {} does not match the {} model",
                self.attack.name(),
                self.model.name()
            )));
        }
        if self.attack == AttackKind::None {
            if let Some(targets) = &self.targets {
                targets.validate(self.k, l)?;
            }
            return Ok(Attack::None);
        }
        let targets = self
            .targets
            .clone()
            .ok_or_else(|| Error::Config(format!("attack {} requires targets", self.attack.name())))?;
        targets.validate(self.k, l)?;

        let cascade_schedule = || {
            let w_m = self.resolve_w_m(&targets)?;
            cascade_ofa_params(self.alpha, self.horizon, self.k, l, w_m)
        };
        let pbm_schedule = |bias| {
            let w_m = self.resolve_w_m(&targets)?;
            pbm_ofa_params(self.alpha, self.horizon, self.k, l, bias, w_m)
        };
        let attack = match (self.attack, &self.model) {
            (AttackKind::CascadeOfa, _) => Attack::CascadeOfa {
                schedule: cascade_schedule()?,
                targets,
            },
            (AttackKind::PbmOfa, ClickModelKind::Pbm { bias }) => Attack::PbmOfa {
                schedule: pbm_schedule(bias)?,
                targets,
            },
            (AttackKind::CascadeAtq, _) => {
                let budget = match self.atq_budget {
                    Some(b) => b,
                    None => cascade_schedule()?.budget(),
                };
                Attack::CascadeAtq { budget, targets }
            }
            (AttackKind::PbmAtq, ClickModelKind::Pbm { bias }) => {
                let budget = match self.atq_budget {
                    Some(b) => b,
                    None => pbm_schedule(bias)?.budget(),
                };
                Attack::PbmAtq {
                    budget,
                    targets,
                    bias: bias.clone(),
                }
            }
            _ => unreachable!("model compatibility checked above"),
        };
        if attack.is_observation_free() && attack.budget() >= self.horizon {
            return Err(Error::Config(format!(
                "horizon {} does not exceed the attack budget T1 + T2 = {}",
                self.horizon,
                attack.budget()
            )));
        }
        Ok(attack)
    }

    fn build_ranker(&self) -> Result<Box<dyn Ranker>> {
        Ok(match &self.model {
            ClickModelKind::Cascade => Box::new(CascadeUcb1::new(self.profile.len(), self.k, self.alpha)?),
            ClickModelKind::Pbm { bias } => Box::new(PbmUcb::new(self.profile.len(), bias.clone(), self.alpha)?),
        })
    }
}

/// Rounds at which the cumulative regret is sampled: about [`CURVE_POINTS`]
/// geometrically spaced rounds in `1..=T`, always ending at `T`.
pub fn regret_grid(horizon: u64) -> Vec<u64> {
    if horizon == 0 {
        return Vec::new();
    }
    let ln_t = (horizon as f64).ln();
    let steps = (CURVE_POINTS - 1) as f64;
    let mut grid: Vec<u64> = (0..CURVE_POINTS)
        .map(|i| ((i as f64 * ln_t / steps).exp().round() as u64).clamp(1, horizon))
        .collect();
    grid.push(horizon);
    grid.dedup();
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub round: u64,
    pub cumulative_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub run_index: usize,
    pub seed: u64,
    pub regret_curve: Vec<CurvePoint>,
    pub final_regret: f64,
    /// `n_a(T)` per item, indexed by `item.index()`.
    pub rec_counts: Vec<u64>,
    pub manipulated_rounds: u64,
    /// Fraction of rounds in which every target was listed; `None` without targets.
    pub target_coverage: Option<f64>,
    /// For observation-free attacks: whether every round after the attack
    /// listed a permutation of the target list.
    pub locked_after_attack: Option<bool>,
    horizon: u64,
    targets: Option<Vec<usize>>,
}

impl RunResult {
    /// Fraction of rounds in which each target was listed, in target order.
    pub fn target_fractions(&self) -> Option<Vec<f64>> {
        self.targets.as_ref().map(|idx| {
            idx.iter()
                .map(|&i| self.rec_counts[i] as f64 / self.horizon as f64)
                .collect()
        })
    }

    /// Every target listed in at least [`SUCCESS_FRACTION`] of rounds.
    pub fn is_success(&self) -> bool {
        self.target_fractions()
            .is_some_and(|f| f.iter().all(|&x| x >= SUCCESS_FRACTION))
    }
}

/// What an observer sees after each round's update.
pub struct RoundRecord<'a> {
    pub t: u64,
    pub list: &'a RankedList,
    pub feedback: &'a FeedbackRound,
    pub regret: f64,
    pub cumulative_regret: f64,
}

/// Per-round hook. Called after the ranker consumed round `t`, so
/// `ranker.round() == t + 1` and `ranker.ucb_values()` are `U_a(t + 1)`.
pub trait RoundObserver {
    fn on_round(&mut self, record: &RoundRecord<'_>, ranker: &dyn Ranker);
}

impl RoundObserver for () {
    fn on_round(&mut self, _: &RoundRecord<'_>, _: &dyn Ranker) {}
}

impl<F: FnMut(&RoundRecord<'_>, &dyn Ranker)> RoundObserver for F {
    fn on_round(&mut self, record: &RoundRecord<'_>, ranker: &dyn Ranker) {
        self(record, ranker)
    }
}

/// A validated configuration ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    attack: Attack,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let attack = config.build_attack()?;
        Ok(Self { config, attack })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn attack(&self) -> &Attack {
        &self.attack
    }

    pub fn run_once(&self, run_index: usize, seed: u64) -> Result<RunResult> {
        self.run_observed(run_index, seed, &mut ())
    }

    pub fn run_observed<O: RoundObserver + ?Sized>(
        &self,
        run_index: usize,
        seed: u64,
        observer: &mut O,
    ) -> Result<RunResult> {
        let cfg = &self.config;
        let horizon = cfg.horizon;
        let mut ranker = cfg.build_ranker()?;
        let meter = RegretMeter::new(&cfg.model, &cfg.profile, cfg.k);
        let mut env = RngStream::new(seed, StreamKind::Environment);
        let mut adversary = RngStream::new(seed, StreamKind::Adversary);

        let targets = self
            .attack
            .targets()
            .or(cfg.targets.as_ref())
            .map(|t| t.targets().to_vec());
        let target_list = self
            .attack
            .is_observation_free()
            .then(|| self.attack.targets().map(|t| t.target_list().to_vec()))
            .flatten();
        let budget = self.attack.budget();

        let grid = regret_grid(horizon);
        let mut next_grid = 0;
        let mut curve = Vec::with_capacity(grid.len());
        let mut rec_counts = vec![0u64; cfg.profile.len()];
        let mut manipulated = 0u64;
        let mut covered = 0u64;
        let mut locked = true;
        let mut cumulative = 0.0f64;

        for t in 1..=horizon {
            let list = ranker.recommend();
            let feedback = match self.attack.transform(t, &list, &mut adversary) {
                Some(fb) => {
                    manipulated += 1;
                    fb
                }
                None => cfg.model.simulate(&list, &cfg.profile, &mut env),
            };
            ranker.update(&list, &feedback)?;

            let regret = meter.regret(&list);
            cumulative += regret;
            for &a in list.items() {
                rec_counts[a.index()] += 1;
            }
            if let Some(ts) = &targets {
                if ts.iter().all(|&a| list.contains(a)) {
                    covered += 1;
                }
            }
            if t > budget {
                if let Some(lambda) = &target_list {
                    locked &= list.is_permutation_of(lambda);
                }
            }
            if grid.get(next_grid) == Some(&t) {
                curve.push(CurvePoint {
                    round: t,
                    cumulative_regret: cumulative,
                });
                next_grid += 1;
            }
            observer.on_round(
                &RoundRecord {
                    t,
                    list: &list,
                    feedback: &feedback,
                    regret,
                    cumulative_regret: cumulative,
                },
                ranker.as_ref(),
            );
        }

        Ok(RunResult {
            run_index,
            seed,
            regret_curve: curve,
            final_regret: cumulative,
            rec_counts,
            manipulated_rounds: manipulated,
            target_coverage: targets.as_ref().map(|_| covered as f64 / horizon as f64),
            locked_after_attack: target_list.map(|_| locked),
            horizon,
            targets: targets.map(|ts| ts.iter().map(|a| a.index()).collect()),
        })
    }

    /// Runs `config.runs` replications on `workers` threads (1 = sequential
    /// on the calling thread). Output does not depend on `workers`.
    pub fn run_many(&self, workers: usize) -> Result<Summary> {
        self.run_many_observed(workers, |_| ()).map(|(s, _)| s)
    }

    /// As [`Experiment::run_many`], with one observer per run built by `make_observer(run_index)`.
    pub fn run_many_observed<O, F>(&self, workers: usize, make_observer: F) -> Result<(Summary, Vec<O>)>
    where
        O: RoundObserver + Send,
        F: Fn(usize) -> O + Sync,
    {
        let one = |i: usize| -> Result<(RunResult, O)> {
            let mut observer = make_observer(i);
            let result = self.run_observed(i, run_seed(self.config.master_seed, i as u64), &mut observer)?;
            Ok((result, observer))
        };
        let outcomes: Vec<Result<(RunResult, O)>> = if workers <= 1 {
            (0..self.config.runs).map(one).collect()
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| (0..self.config.runs).into_par_iter().map(one).collect())
        };
        let mut runs = Vec::with_capacity(outcomes.len());
        let mut observers = Vec::with_capacity(outcomes.len());
        for outcome in outcomes {
            let (r, o) = outcome?;
            runs.push(r);
            observers.push(o);
        }
        Ok((Summary::from_runs(runs), observers))
    }
}

pub fn run_once(config: &ExperimentConfig, seed: u64) -> Result<RunResult> {
    Experiment::new(config.clone())?.run_once(0, seed)
}

pub fn run_many(config: &ExperimentConfig, workers: usize) -> Result<Summary> {
    Experiment::new(config.clone())?.run_many(workers)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveStat {
    pub round: u64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub runs: Vec<RunResult>,
    pub mean_final_regret: f64,
    pub std_final_regret: f64,
    pub mean_rec_counts: Vec<f64>,
    pub success_runs: usize,
    pub curve: Vec<CurveStat>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl Summary {
    /// Folds runs in run-index order.
    pub fn from_runs(mut runs: Vec<RunResult>) -> Self {
        runs.sort_by_key(|r| r.run_index);
        let finals: Vec<f64> = runs.iter().map(|r| r.final_regret).collect();
        let (mean_final_regret, std_final_regret) = mean_std(&finals);
        let l = runs.first().map_or(0, |r| r.rec_counts.len());
        let n = runs.len() as f64;
        let mean_rec_counts = (0..l)
            .map(|i| runs.iter().map(|r| r.rec_counts[i] as f64).sum::<f64>() / n)
            .collect();
        let points = runs.first().map_or(0, |r| r.regret_curve.len());
        let curve = (0..points)
            .map(|j| {
                let ys: Vec<f64> = runs.iter().map(|r| r.regret_curve[j].cumulative_regret).collect();
                let (mean, std) = mean_std(&ys);
                CurveStat {
                    round: runs[0].regret_curve[j].round,
                    mean,
                    std,
                }
            })
            .collect();
        let success_runs = runs.iter().filter(|r| r.is_success()).count();
        Self {
            runs,
            mean_final_regret,
            std_final_regret,
            mean_rec_counts,
            success_runs,
            curve,
        }
    }
}

/// Writes one CSV row per round (and optionally one row per item per round
/// with the ranker's counters and UCBs) as a [`RoundObserver`].
///
/// Round log columns: `t,list,manipulated,exam,clicks,regret,cumulative_regret`,
/// where `list` holds space-separated item ids and `exam`/`clicks` are bit strings
/// in position order. State dump columns:
/// `t,item,count,clicks,exam_estimate,mean,ucb_next`.
pub struct EventLog<W: Write> {
    rounds: W,
    state: Option<W>,
    error: Option<std::io::Error>,
}

impl<W: Write> EventLog<W> {
    pub fn new(mut rounds: W, state: Option<W>) -> std::io::Result<Self> {
        writeln!(rounds, "t,list,manipulated,exam,clicks,regret,cumulative_regret")?;
        let state = match state {
            Some(mut s) => {
                writeln!(s, "t,item,count,clicks,exam_estimate,mean,ucb_next")?;
                Some(s)
            }
            None => None,
        };
        Ok(Self {
            rounds,
            state,
            error: None,
        })
    }

    fn write(&mut self, record: &RoundRecord<'_>, ranker: &dyn Ranker) -> std::io::Result<()> {
        let bits = |v: &[bool]| v.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>();
        writeln!(
            self.rounds,
            "{},{},{},{},{},{},{}",
            record.t,
            record.list,
            record.feedback.manipulated as u8,
            bits(&record.feedback.exam),
            bits(&record.feedback.clicks),
            record.regret,
            record.cumulative_regret
        )?;
        if let Some(state) = &mut self.state {
            for row in ranker.state() {
                let estimate = row.exam_estimate.map(|x| x.to_string()).unwrap_or_default();
                writeln!(
                    state,
                    "{},{},{},{},{},{},{}",
                    record.t, row.item, row.count, row.clicks, estimate, row.mean, row.ucb
                )?;
            }
        }
        Ok(())
    }

    /// Flushes, reports the first write error if any, and hands back the writers.
    pub fn finish(mut self) -> std::io::Result<(W, Option<W>)> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.rounds.flush()?;
        if let Some(s) = &mut self.state {
            s.flush()?;
        }
        Ok((self.rounds, self.state))
    }
}

impl<W: Write> RoundObserver for EventLog<W> {
    fn on_round(&mut self, record: &RoundRecord<'_>, ranker: &dyn Ranker) {
        if self.error.is_none() {
            if let Err(e) = self.write(record, ranker) {
                self.error = Some(e);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{ItemId, PositionBias};

    fn cascade(horizon: u64) -> ExperimentConfig {
        ExperimentConfig::new(
            ClickModelKind::Cascade,
            AttractionProfile::appendix_d(),
            3,
            horizon,
            1.5,
        )
    }

    fn pbm(horizon: u64) -> ExperimentConfig {
        let bias = PositionBias::new(vec![0.95, 0.90, 0.85]).unwrap();
        ExperimentConfig::new(
            ClickModelKind::Pbm { bias },
            AttractionProfile::appendix_d(),
            3,
            horizon,
            1.5,
        )
    }

    fn targets(ids: &[u32]) -> TargetSpec {
        TargetSpec::from_ids(ids, 3, 10).unwrap()
    }

    #[test]
    fn grid_is_increasing_and_ends_at_horizon() {
        for horizon in [1, 2, 10, 1000, 500_000] {
            let g = regret_grid(horizon);
            assert_eq!(*g.last().unwrap(), horizon);
            assert_eq!(g[0], 1);
            assert!(g.windows(2).all(|w| w[0] < w[1]));
            assert!(g.len() <= CURVE_POINTS + 1);
        }
        assert!(regret_grid(500_000).len() > 150);
    }

    #[test]
    fn no_attack_run_basics() {
        let r = run_once(&cascade(1000), 11).unwrap();
        assert!(r.final_regret > 0.0);
        assert_eq!(r.rec_counts.iter().sum::<u64>(), 3 * 1000);
        assert_eq!(r.manipulated_rounds, 0);
        assert!(r
            .regret_curve
            .windows(2)
            .all(|w| w[0].cumulative_regret <= w[1].cumulative_regret));
        assert_eq!(r.regret_curve.last().unwrap().cumulative_regret, r.final_regret);
        assert_eq!(r.target_coverage, None);
        assert_eq!(r.locked_after_attack, None);
    }

    #[test]
    fn incompatible_configs_rejected() {
        let mut c = cascade(1000).with_attack(AttackKind::PbmOfa, targets(&[8, 9, 10]), 0.08);
        assert!(matches!(c.build_attack(), Err(Error::Config(_))));
        c = pbm(1000).with_attack(AttackKind::CascadeOfa, targets(&[4, 7, 10]), 0.08);
        assert!(c.build_attack().is_err());
        let mut missing = cascade(500_000);
        missing.attack = AttackKind::CascadeOfa;
        missing.w_m = Some(0.08);
        assert!(missing
            .build_attack()
            .unwrap_err()
            .to_string()
            .contains("requires targets"));
        let mut mismatched = cascade(1000);
        mismatched.ranker = RankerKind::PbmUcb;
        assert!(mismatched.build_attack().is_err());
        let short = cascade(5000).with_attack(AttackKind::CascadeOfa, targets(&[4, 7, 10]), 0.08);
        assert!(short.build_attack().unwrap_err().to_string().contains("budget"));
        assert!(cascade(1000).with_runs(0, 1).build_attack().is_err());
    }

    #[test]
    fn attack_budgets() {
        let ofa = cascade(500_000).with_attack(AttackKind::CascadeOfa, targets(&[4, 7, 10]), 0.08);
        assert_eq!(ofa.build_attack().unwrap().budget(), 11265);
        let mut atq = ofa.clone();
        atq.attack = AttackKind::CascadeAtq;
        assert_eq!(atq.build_attack().unwrap().budget(), 11265);
        atq.atq_budget = Some(77);
        assert_eq!(atq.build_attack().unwrap().budget(), 77);
        let mut eps = ofa.clone();
        eps.w_m = None;
        eps.epsilon = Some(1.0 - 0.08 / 0.082);
        assert_eq!(eps.build_attack().unwrap().budget(), 11265);
    }

    #[test]
    fn manipulation_count_matches_budget() {
        let mut c = cascade(20_000).with_attack(AttackKind::CascadeAtq, targets(&[4, 7, 10]), 0.08);
        c.atq_budget = Some(1234);
        let r = run_once(&c, 3).unwrap();
        assert_eq!(r.manipulated_rounds, 1234);
        assert!(r.target_coverage.is_some());
    }

    #[test]
    fn single_run_aggregate_is_degenerate() {
        let s = run_many(&cascade(2000).with_runs(1, 5), 1).unwrap();
        assert_eq!(s.runs.len(), 1);
        assert_eq!(s.mean_final_regret, s.runs[0].final_regret);
        assert_eq!(s.std_final_regret, 0.0);
        assert!(s.curve.iter().all(|c| c.std == 0.0));
    }

    #[test]
    fn workers_do_not_change_results() {
        let c = pbm(3000).with_runs(4, 99);
        assert_eq!(run_many(&c, 1).unwrap(), run_many(&c, 3).unwrap());
    }

    #[test]
    fn event_log_regret_column_sums_to_final() {
        let exp = Experiment::new(cascade(500)).unwrap();
        let mut rounds = Vec::new();
        let mut state = Vec::new();
        let result = {
            let mut log = EventLog::new(&mut rounds, Some(&mut state)).unwrap();
            let r = exp.run_observed(0, 8, &mut log).unwrap();
            log.finish().unwrap();
            r
        };
        let text = String::from_utf8(rounds).unwrap();
        let mut sum = 0.0f64;
        for line in text.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            sum += cols[5].parse::<f64>().unwrap();
        }
        assert_eq!(sum, result.final_regret);
        let state_rows = String::from_utf8(state).unwrap().lines().count();
        assert_eq!(state_rows, 1 + 500 * 10);
    }

    #[test]
    fn coverage_tracks_targets_without_attack() {
        let mut c = cascade(2000);
        c.targets = Some(targets(&[1, 2, 3]));
        let r = run_once(&c, 1).unwrap();
        let f = r.target_fractions().unwrap();
        assert_eq!(f.len(), 3);
        assert!(r.target_coverage.unwrap() <= f.iter().cloned().fold(1.0, f64::min));
        assert_eq!(r.rec_counts[ItemId(1).index()] as f64 / 2000.0, f[0]);
    }
}
