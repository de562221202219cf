//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oltr_sim::attacks::{pbm_ofa_transform, Attack};
use oltr_sim::harness::{mean_std, RoundObserver, RoundRecord, Summary};
use oltr_sim::rng::{RngStream, StreamKind};
use oltr_sim::{
    cascade_ofa_params, expected_reward, pbm_ofa_params, AttackKind, AttractionProfile, ClickModelKind, Experiment,
    ExperimentConfig, ItemId, PbmUcb, PositionBias, RankedList, Ranker, TargetSpec,
};

const HORIZON: u64 = 500_000;
const RUNS: usize = 50;
const ALPHA: f64 = 1.5;
const K: usize = 3;
const L: usize = 10;
const W_M: f64 = 0.08;
const SEED: u64 = 20240601;
const PBM_ATQ_BUDGET: u64 = 12811;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn bias() -> PositionBias {
    PositionBias::new(vec![0.95, 0.90, 0.85]).unwrap()
}

fn cascade(horizon: u64) -> ExperimentConfig {
    ExperimentConfig::new(
        ClickModelKind::Cascade,
        AttractionProfile::appendix_d(),
        K,
        horizon,
        ALPHA,
    )
    .with_runs(RUNS, SEED)
}

fn pbm(horizon: u64) -> ExperimentConfig {
    ExperimentConfig::new(
        ClickModelKind::Pbm { bias: bias() },
        AttractionProfile::appendix_d(),
        K,
        horizon,
        ALPHA,
    )
    .with_runs(RUNS, SEED)
}

fn attacked(config: ExperimentConfig, kind: AttackKind, targets: &[u32]) -> ExperimentConfig {
    config.with_attack(kind, TargetSpec::from_ids(targets, K, L).unwrap(), W_M)
}

fn run(config: ExperimentConfig) -> Summary {
    Experiment::new(config).unwrap().run_many(workers()).unwrap()
}

/// UCBs and counts right after selected rounds, i.e. `U_a(t + 1)`.
struct Probe {
    at: Vec<u64>,
    seen: Vec<(u64, Vec<f64>, Vec<u64>)>,
}

impl RoundObserver for Probe {
    fn on_round(&mut self, record: &RoundRecord<'_>, ranker: &dyn Ranker) {
        if self.at.contains(&record.t) {
            let counts = ranker.state().iter().map(|s| s.count).collect();
            self.seen.push((record.t, ranker.ucb_values(), counts));
        }
    }
}

fn probed(config: ExperimentConfig, at: Vec<u64>) -> (Experiment, Summary, Vec<Probe>) {
    let experiment = Experiment::new(config).unwrap();
    let (summary, probes) = experiment
        .run_many_observed(workers(), |_| Probe {
            at: at.clone(),
            seen: Vec::new(),
        })
        .unwrap();
    (experiment, summary, probes)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    ((a - b) / b).abs() <= tol
}

struct Shared {
    cascade_ofa: (Experiment, Summary, Vec<Probe>),
    pbm_ofa: (Experiment, Summary, Vec<Probe>),
}

fn criterion_1() -> Outcome {
    let s = cascade_ofa_params(ALPHA, HORIZON, K, L, W_M).unwrap();
    outcome(
        (s.t1, s.t2) == (10260, 1005),
        format!("T1={} T2={} (expected 10260, 1005)", s.t1, s.t2),
    )
}

fn criterion_2() -> Outcome {
    let s = pbm_ofa_params(ALPHA, HORIZON, K, L, &bias(), W_M).unwrap();
    let reals = [
        ("lambda_p", s.lambda_p, 1.1176470588235294),
        ("eta", s.eta, 0.774),
        ("rho", s.rho, 86.13674984165351),
        ("gamma", s.gamma, 125.77752972924978),
    ];
    let reals_ok = reals.iter().all(|&(_, got, want)| rel_close(got, want, 1e-9));
    let ints_ok = (s.t1, s.t2) == (17728, 6876);
    outcome(
        reals_ok && ints_ok,
        format!(
            "T1={} T2={} lambda_p={} eta={} rho={} gamma={}; reported for these settings: T1=11507 T2=1304 (formula evaluation differs)",
            s.t1, s.t2, s.lambda_p, s.eta, s.rho, s.gamma
        ),
    )
}

fn promotion(summary: &Summary, need: usize, check_lock: bool) -> (bool, String) {
    let successes: Vec<_> = summary.runs.iter().filter(|r| r.is_success()).collect();
    let locked = successes.iter().filter(|r| r.locked_after_attack == Some(true)).count();
    let min_cov = summary
        .runs
        .iter()
        .filter_map(|r| r.target_coverage)
        .fold(f64::INFINITY, f64::min);
    let pass = successes.len() >= need && (!check_lock || locked == successes.len());
    let mut detail = format!(
        "{}/{} runs with every target listed in >= 95% of rounds (need {need}); min coverage {min_cov:.4}",
        successes.len(),
        summary.runs.len()
    );
    if check_lock {
        detail.push_str(&format!(
            "; {locked}/{} successful runs list a permutation of the target list after the attack",
            successes.len()
        ));
    }
    (pass, detail)
}

fn criterion_3(shared: &Shared) -> Outcome {
    let (pass, detail) = promotion(&shared.cascade_ofa.1, 48, true);
    outcome(pass, detail)
}

fn criterion_4(shared: &Shared) -> Outcome {
    let (pass, detail) = promotion(&shared.pbm_ofa.1, 46, false);
    outcome(pass, detail)
}

fn regret_table(none: f64, none_range: (f64, f64), ofa: f64, ofa_ref: f64, ofa_tol: f64, atq: f64) -> Outcome {
    let none_ok = none >= none_range.0 && none <= none_range.1;
    let ofa_ok = rel_close(ofa, ofa_ref, ofa_tol);
    let atq_ok = atq > none && atq < 0.25 * ofa;
    outcome(
        none_ok && ofa_ok && atq_ok,
        format!(
            "no-attack {none:.1} in [{}, {}]: {none_ok}; OFA {ofa:.1} within {}% of {ofa_ref}: {ofa_ok}; ATQ {atq:.1} in ({none:.1}, {:.1}): {atq_ok}",
            none_range.0,
            none_range.1,
            ofa_tol * 100.0,
            0.25 * ofa
        ),
    )
}

fn criterion_5(shared: &Shared) -> Outcome {
    let none = run(cascade(HORIZON)).mean_final_regret;
    let atq = run(attacked(cascade(HORIZON), AttackKind::CascadeAtq, &[4, 7, 10])).mean_final_regret;
    regret_table(
        none,
        (1e3, 5e3),
        shared.cascade_ofa.1.mean_final_regret,
        1.473e5,
        0.10,
        atq,
    )
}

fn criterion_6(shared: &Shared) -> Outcome {
    let none = run(pbm(HORIZON)).mean_final_regret;
    let mut atq = attacked(pbm(HORIZON), AttackKind::PbmAtq, &[8, 9, 10]);
    atq.atq_budget = Some(PBM_ATQ_BUDGET);
    let atq = run(atq).mean_final_regret;
    regret_table(none, (1e3, 6e3), shared.pbm_ofa.1.mean_final_regret, 1.922e5, 0.15, atq)
}

fn check_cascade_thresholds(shared: &Shared) -> (bool, String) {
    let (experiment, _, probes) = &shared.cascade_ofa;
    let Attack::CascadeOfa { schedule, targets } = experiment.attack() else {
        unreachable!()
    };
    let mut after_phase1 = 0;
    let mut after_phase2 = 0;
    let mut round_robin = 0;
    let per_item = K as u64 * schedule.t1 / L as u64;
    for probe in probes {
        let (_, ucb1, counts1) = &probe.seen[0];
        after_phase1 += ucb1.iter().all(|&u| u <= W_M) as usize;
        round_robin += counts1.iter().all(|&n| n - 1 == per_item) as usize;
        let (_, ucb2, _) = &probe.seen[1];
        after_phase2 += ucb2.iter().enumerate().all(|(i, &u)| {
            if targets.in_target_list(ItemId::from_index(i)) {
                u > W_M
            } else {
                u <= W_M
            }
        }) as usize;
    }
    let n = probes.len();
    (
        after_phase1 == n && after_phase2 == n && round_robin == n,
        format!(
            "cascade: all UCBs <= w_m after phase 1 in {after_phase1}/{n}; targets > w_m >= others after phase 2 in {after_phase2}/{n}; N_a - 1 = K T1/L = {per_item} in {round_robin}/{n}"
        ),
    )
}

/// Phase-1 feedback only, driven by the ranker directly.
fn round_robin_small() -> (bool, String) {
    let schedule = cascade_ofa_params(2.0, 10_000, 2, 4, 0.1).unwrap();
    let mut ranker = oltr_sim::CascadeUcb1::new(4, 2, 2.0).unwrap();
    let all_zero = oltr_sim::FeedbackRound {
        exam: vec![true; 2],
        clicks: vec![false; 2],
        manipulated: true,
    };
    let mut spread_ok = true;
    for t in 1..=schedule.t1 {
        let list = ranker.recommend();
        ranker.update(&list, &all_zero).unwrap();
        let counts: Vec<u64> = ranker.state().iter().map(|s| s.count).collect();
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        spread_ok &= hi - lo <= 1;
        if t % 2 == 0 {
            spread_ok &= hi == lo;
        }
    }
    let per_item = 2 * schedule.t1 / 4;
    let exact = (1..=4).all(|i| ranker.examinations(ItemId(i)) - 1 == per_item);
    (
        spread_ok && exact,
        format!(
            "L=4 K=2 T1={}: counts within 1 throughout: {spread_ok}; N_a - 1 = {per_item}: {exact}",
            schedule.t1
        ),
    )
}

fn check_pbm_threshold(shared: &Shared) -> (bool, String) {
    let (experiment, _, probes) = &shared.pbm_ofa;
    let Attack::PbmOfa { schedule, .. } = experiment.attack() else {
        unreachable!()
    };
    let ok = probes
        .iter()
        .filter(|p| p.seen[0].1.iter().all(|&u| u <= schedule.w_m))
        .count();
    (
        ok == probes.len(),
        format!("pbm: all UCBs <= w_m after phase 1 in {ok}/{}", probes.len()),
    )
}

fn pairwise_bound() -> (bool, String) {
    let (l, k, horizon) = (6, 2, 20_000);
    let bias = PositionBias::new(vec![0.95, 0.85]).unwrap();
    let schedule = pbm_ofa_params(ALPHA, horizon, k, l, &bias, W_M).unwrap();
    let targets = TargetSpec::from_ids(&[5, 6], k, l).unwrap();
    let lambda2 = schedule.lambda_p * schedule.lambda_p;
    let mut ranker = PbmUcb::new(l, bias.clone(), ALPHA).unwrap();
    let mut rng = RngStream::new(7, StreamKind::Adversary);
    let mut first_violation = None;
    let mut worst = f64::NEG_INFINITY;
    for t in 1..=schedule.t1 {
        let list = ranker.recommend();
        let feedback = pbm_ofa_transform(&schedule, &targets, t, &list, &mut rng).unwrap();
        ranker.update(&list, &feedback).unwrap();
        let n: Vec<f64> = ranker.state().iter().map(|s| s.count as f64).collect();
        for &nj in &n {
            for &ni in &n {
                let slack = nj - (lambda2 * ni + 1.0);
                worst = worst.max(slack);
                if slack > 0.0 && first_violation.is_none() {
                    first_violation = Some(t);
                }
            }
        }
    }
    (
        first_violation.is_none(),
        format!(
            "L={l} K={k} T={horizon} T1={}: n_j <= lambda_p^2 n_i + 1 every round: {} (max slack {worst:.4}{})",
            schedule.t1,
            first_violation.is_none(),
            first_violation
                .map(|t| format!(", first violation at t={t}"))
                .unwrap_or_default()
        ),
    )
}

fn criterion_7(shared: &Shared) -> Outcome {
    let parts = [
        check_cascade_thresholds(shared),
        round_robin_small(),
        check_pbm_threshold(shared),
        pairwise_bound(),
    ];
    let pass = parts.iter().all(|(p, _)| *p);
    outcome(
        pass,
        parts.iter().map(|(_, d)| d.as_str()).collect::<Vec<_>>().join("; "),
    )
}

fn criterion_8() -> Outcome {
    let targets = [4, 7, 10];
    let half = HORIZON / 2;
    let ofa_half = run(attacked(cascade(half), AttackKind::CascadeOfa, &targets)).mean_final_regret;
    let ofa_full = run(attacked(cascade(HORIZON), AttackKind::CascadeOfa, &targets)).mean_final_regret;
    let ofa_ratio = ofa_full / ofa_half;
    let none_half = run(cascade(half)).mean_final_regret;
    let none_full = run(cascade(HORIZON)).mean_final_regret;
    let none_ratio = none_full / none_half;

    let oracle = [(10_000u64, 7914u64), (100_000, 9885), (1_000_000, 11856)];
    let mut counts_ok = true;
    let mut per_log = Vec::new();
    let mut counts = Vec::new();
    for (horizon, expected) in oracle {
        let config = attacked(cascade(horizon), AttackKind::CascadeOfa, &targets).with_runs(1, SEED);
        let measured = Experiment::new(config)
            .unwrap()
            .run_once(0, SEED)
            .unwrap()
            .manipulated_rounds;
        counts_ok &= rel_close(measured as f64, expected as f64, 0.05);
        per_log.push(measured as f64 / (horizon as f64).ln());
        counts.push(measured);
    }
    let (mean_ratio, _) = mean_std(&per_log);
    let log_ok = per_log.iter().all(|r| rel_close(*r, mean_ratio, 0.05));
    let ofa_ok = (1.8..=2.2).contains(&ofa_ratio);
    let none_ok = none_ratio < 1.5;
    outcome(
        ofa_ok && none_ok && counts_ok && log_ok,
        format!(
            "OFA R(T)/R(T/2) = {ofa_ratio:.4} in [1.8, 2.2]: {ofa_ok}; no-attack ratio {none_ratio:.4} < 1.5: {none_ok}; manipulated rounds {counts:?} vs 7914/9885/11856 within 5%: {counts_ok}; per ln T {:?}: {log_ok}",
            per_log.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>()
        ),
    )
}

fn random_case(rng: &mut ChaCha8Rng) -> (RankedList, AttractionProfile, PositionBias) {
    let k = rng.gen_range(1..=4);
    let l = rng.gen_range(k..=10);
    let w: Vec<f64> = (0..l).map(|_| rng.gen::<f64>()).collect();
    let mut ids: Vec<u32> = (1..=l as u32).collect();
    rand::seq::SliceRandom::shuffle(ids.as_mut_slice(), rng);
    ids.truncate(k);
    let mut p: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..=1.0)).collect();
    p.sort_by(|a, b| b.total_cmp(a));
    (
        RankedList::from_ids(&ids, l).unwrap(),
        AttractionProfile::new(w).unwrap(),
        PositionBias::new(p).unwrap(),
    )
}

fn monte_carlo(kind: &ClickModelKind, list: &RankedList, profile: &AttractionProfile, seed: u64) -> (f64, f64) {
    const ROUNDS: usize = 1_000_000;
    let mut rng = RngStream::new(seed, StreamKind::Environment);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..ROUNDS {
        let clicks = kind.simulate(list, profile, &mut rng).click_count() as f64;
        sum += clicks;
        sum_sq += clicks * clicks;
    }
    let n = ROUNDS as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn csv_bytes(dir: &Path, workers: usize) -> Vec<Vec<u8>> {
    let status = Command::new(env!("CARGO_BIN_EXE_oltr-sim"))
        .args([
            "run",
            "--model",
            "cascade",
            "-k",
            "3",
            "-T",
            "20000",
            "--alpha",
            "1.5",
            "--attack",
            "cascade-atq",
            "--targets",
            "4,7,10",
            "--w-m",
            "0.08",
            "--runs",
            "6",
            "--seed",
            "99",
            "--workers",
        ])
        .arg(workers.to_string())
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs");
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    ["run.summary.csv", "run.curve.csv"]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).unwrap())
        .collect()
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut within = [0usize; 2];
    let mut worst_z: f64 = 0.0;
    for case in 0..10u64 {
        let (list, profile, bias) = random_case(&mut rng);
        let models = [ClickModelKind::Cascade, ClickModelKind::Pbm { bias }];
        for (m, kind) in models.iter().enumerate() {
            let exact = expected_reward(kind, &list, &profile);
            let (mean, se) = monte_carlo(kind, &list, &profile, SEED + case * 2 + m as u64);
            let ok = if se > 0.0 {
                worst_z = worst_z.max((mean - exact).abs() / se);
                (mean - exact).abs() <= 3.0 * se
            } else {
                (mean - exact).abs() < 1e-12
            };
            within[m] += ok as usize;
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let single = csv_bytes(&dir.path().join("w1"), 1);
    let parallel = csv_bytes(&dir.path().join("w4"), 4);
    let again = csv_bytes(&dir.path().join("w1b"), 1);
    let identical = single == parallel && single == again;
    outcome(
        within == [10, 10] && identical,
        format!(
            "Monte Carlo within 3 SE: cascade {}/10, pbm {}/10 (max |z| {worst_z:.3}); CSVs byte-identical across --workers 1, 4 and a rerun: {identical}",
            within[0], within[1]
        ),
    )
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    // `cargo test -- --list` and friends: this target has no named tests.
    if args.iter().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let start = Instant::now();
    let c = attacked(cascade(HORIZON), AttackKind::CascadeOfa, &[4, 7, 10]);
    let c_budget = Experiment::new(c.clone()).unwrap().attack().budget();
    let c_t1 = cascade_ofa_params(ALPHA, HORIZON, K, L, W_M).unwrap().t1;
    let p = attacked(pbm(HORIZON), AttackKind::PbmOfa, &[8, 9, 10]);
    let p_t1 = pbm_ofa_params(ALPHA, HORIZON, K, L, &bias(), W_M).unwrap().t1;
    let shared = Shared {
        cascade_ofa: probed(c, vec![c_t1, c_budget]),
        pbm_ofa: probed(p, vec![p_t1]),
    };

    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: [(&str, Check<'_>); 9] = [
        ("1 cascade schedule", Box::new(criterion_1)),
        ("2 pbm schedule", Box::new(criterion_2)),
        ("3 cascade promotion", Box::new(|| criterion_3(&shared))),
        ("4 pbm promotion", Box::new(|| criterion_4(&shared))),
        ("5 cascade regret table", Box::new(|| criterion_5(&shared))),
        ("6 pbm regret table", Box::new(|| criterion_6(&shared))),
        ("7 phase invariants", Box::new(|| criterion_7(&shared))),
        ("8 scaling", Box::new(criterion_8)),
        ("9 oracles and determinism", Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let t = Instant::now();
        let o = check();
        failed += !o.pass as usize;
        println!(
            "criterion {name}: {} ({:.1}s) {}",
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
