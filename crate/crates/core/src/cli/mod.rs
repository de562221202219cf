//! `oltr-sim` command line: `params`, `run`, `sweep` and `ingest`.
//!
//! Exit codes: 0 on success, 1 on invalid input or configuration, 2 on I/O
//! failures. The default output directory comes from `OLTR_SIM_OUT`, falling
//! back to `./out`.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::attacks::{cascade_ofa_params, derive_wm_cascade, pbm_ofa_params, PBM_REPORTED_T1_T2};
use crate::data_ingest::{
    attraction_probs, parse_movielens, select_profile, write_profile, RatingsFormat, SelectionMode, DEFAULT_MIN_COUNT,
    DEFAULT_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::harness::{AttackKind, EventLog, Experiment, SUCCESS_FRACTION};
use crate::types::{AttractionProfile, PositionBias};

use config::{FileConfig, ModelName};
use output::{schedule_record, write_curve_csv, write_summary_csv, write_sweep_csv, RunManifest, SweepRow};

pub const OUT_DIR_ENV: &str = "OLTR_SIM_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "oltr-sim",
    version,
    about = "Online learning to rank under observation-free click poisoning"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the attack phase lengths for a parameter set.
    Params(ParamsArgs),
    /// Run replicated experiments and write manifest, summary and curve files.
    Run(RunArgs),
    /// Run the same experiment at several horizons.
    Sweep(SweepArgs),
    /// Build an attraction profile from MovieLens ratings or a built-in name.
    Ingest(IngestArgs),
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    #[arg(long, value_enum)]
    pub model: ModelName,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long = "horizon", short = 'T')]
    pub horizon: u64,
    #[arg(short = 'k', long)]
    pub k: usize,
    #[arg(short = 'l', long)]
    pub l: usize,
    #[arg(long = "w-m")]
    pub w_m: Option<f64>,
    /// Cascade only: derive w_m = (1 - epsilon) min(1/K, w_min).
    #[arg(long, requires = "w_min", conflicts_with = "w_m")]
    pub epsilon: Option<f64>,
    #[arg(long = "w-min")]
    pub w_min: Option<f64>,
    /// Position bias, comma separated (pbm only).
    #[arg(long, value_delimiter = ',')]
    pub bias: Option<Vec<f64>>,
}

/// Settings that override the configuration file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long, value_enum)]
    pub model: Option<ModelName>,
    #[arg(long, value_delimiter = ',')]
    pub bias: Option<Vec<f64>>,
    /// Built-in profile name or profile CSV path.
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(short = 'k', long)]
    pub k: Option<usize>,
    #[arg(long = "horizon", short = 'T')]
    pub horizon: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub attack: Option<AttackArg>,
    #[arg(long, value_delimiter = ',')]
    pub targets: Option<Vec<u32>>,
    #[arg(long = "target-list", value_delimiter = ',')]
    pub target_list: Option<Vec<u32>>,
    #[arg(long = "w-m")]
    pub w_m: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "atq-budget")]
    pub atq_budget: Option<u64>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AttackArg {
    None,
    CascadeOfa,
    PbmOfa,
    CascadeAtq,
    PbmAtq,
}

impl From<AttackArg> for AttackKind {
    fn from(a: AttackArg) -> Self {
        match a {
            AttackArg::None => AttackKind::None,
            AttackArg::CascadeOfa => AttackKind::CascadeOfa,
            AttackArg::PbmOfa => AttackKind::PbmOfa,
            AttackArg::CascadeAtq => AttackKind::CascadeAtq,
            AttackArg::PbmAtq => AttackKind::PbmAtq,
        }
    }
}

impl Overrides {
    fn into_file_config(self) -> FileConfig {
        FileConfig {
            model: self.model,
            bias: self.bias,
            profile: self.profile,
            k: self.k,
            horizon: self.horizon,
            alpha: self.alpha,
            attack: self.attack.map(Into::into),
            targets: self.targets,
            target_list: self.target_list,
            w_m: self.w_m,
            epsilon: self.epsilon,
            atq_budget: self.atq_budget,
            runs: self.runs,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML experiment file; flags override its values.
    pub config: Option<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; 1 runs everything on the calling thread.
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    /// Output file prefix.
    #[arg(long, default_value = "run")]
    pub name: String,
    /// Also write the per-round log and ranker state of this run index.
    #[arg(long)]
    pub events: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', required = true)]
    pub horizons: Vec<u64>,
    #[arg(long, default_value = "sweep")]
    pub name: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    /// Tab separated, no header.
    Legacy,
    /// Comma separated with a header row.
    Csv,
    /// `::` separated, no header.
    Dat,
}

impl From<FormatArg> for RatingsFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Legacy => RatingsFormat::Legacy,
            FormatArg::Csv => RatingsFormat::Csv,
            FormatArg::Dat => RatingsFormat::DoubleColon,
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Ratings file.
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "legacy")]
    pub format: FormatArg,
    /// Built-in profile name instead of a ratings file.
    #[arg(long)]
    pub builtin: Option<String>,
    #[arg(long, short = 'o')]
    pub output: PathBuf,
    #[arg(short = 'l', long, default_value_t = 10)]
    pub l: usize,
    /// Movie ids to keep.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["top_variance", "sample_seed"])]
    pub ids: Option<Vec<u64>>,
    /// Keep the movies with the largest click variance.
    #[arg(long)]
    pub top_variance: bool,
    /// Keep a seeded uniform sample of movies.
    #[arg(long = "sample-seed", conflicts_with = "top_variance")]
    pub sample_seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long = "min-count", default_value_t = DEFAULT_MIN_COUNT)]
    pub min_count: usize,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}

pub fn main() -> i32 {
    run_cli(std::env::args_os())
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Params(a) => cmd_params(&a).map(|text| print!("{text}")),
        Command::Run(a) => cmd_run(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Ingest(a) => cmd_ingest(&a),
    }
}

/// Schedule as `key=value` lines.
pub fn cmd_params(a: &ParamsArgs) -> Result<String> {
    let mut out = String::new();
    let mut line = |k: &str, v: String| out.push_str(&format!("{k}={v}\n"));
    match a.model {
        ModelName::Cascade => {
            let w_m = match (a.w_m, a.epsilon, a.w_min) {
                (Some(w), _, _) => w,
                (None, Some(eps), Some(w_min)) => derive_wm_cascade(w_min, a.k, eps)?,
                _ => return Err(Error::Config("params needs --w-m or --epsilon with --w-min".into())),
            };
            let s = cascade_ofa_params(a.alpha, a.horizon, a.k, a.l, w_m)?;
            line("model", "cascade".into());
            line("w_m", s.w_m.to_string());
            line("T1", s.t1.to_string());
            line("T2", s.t2.to_string());
            line("budget", s.budget().to_string());
            line("sub_phase_len", s.sub_phase_len().to_string());
        }
        ModelName::Pbm => {
            let bias = PositionBias::new(a.bias.clone().ok_or_else(|| Error::Config("pbm needs --bias".into()))?)?;
            let w_m = a.w_m.ok_or_else(|| Error::Config("pbm needs --w-m".into()))?;
            let s = pbm_ofa_params(a.alpha, a.horizon, a.k, a.l, &bias, w_m)?;
            line("model", "pbm".into());
            line("w_m", s.w_m.to_string());
            line("lambda_p", s.lambda_p.to_string());
            line("eta", s.eta.to_string());
            line("rho", s.rho.to_string());
            line("gamma", s.gamma.to_string());
            line("T1", s.t1.to_string());
            line("T2", s.t2.to_string());
            line("budget", s.budget().to_string());
            let reference = a.alpha == 1.5
                && a.horizon == 500_000
                && a.k == 3
                && a.l == 10
                && w_m == 0.08
                && bias.values() == [0.95, 0.90, 0.85];
            if reference {
                line("reported_T1", PBM_REPORTED_T1_T2.0.to_string());
                line("reported_T2", PBM_REPORTED_T1_T2.1.to_string());
                line(
                    "note",
                    "reported values for these settings differ from the formula evaluation above".into(),
                );
            }
        }
    }
    Ok(out)
}

fn resolve(common: &Common) -> Result<(FileConfig, usize)> {
    let base = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let workers = match common.workers {
        Some(0) => return Err(Error::Config("--workers must be at least 1".into())),
        Some(w) => w,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    Ok((base.overlay(common.overrides.clone().into_file_config()), workers))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn cmd_run(a: &RunArgs) -> Result<()> {
    let (file, workers) = resolve(&a.common)?;
    let config = file.resolve()?;
    let experiment = Experiment::new(config.clone())?;
    let out = &a.common.out;
    create_dir(out)?;
    let mut manifest = RunManifest::new("run", &config, None, vec![schedule_record(experiment.attack())]);
    let summary = experiment.run_many(workers)?;

    let path = |suffix: &str| out.join(format!("{}.{suffix}", a.name));
    write_summary_csv(&path("summary.csv"), &manifest.id, &summary, config.profile.len())?;
    write_curve_csv(&path("curve.csv"), &manifest.id, &summary)?;
    if let Some(run) = a.events {
        if run >= config.runs {
            return Err(Error::Config(format!("--events {run} but only {} runs", config.runs)));
        }
        let open = |p: PathBuf| fs::File::create(&p).map(BufWriter::new).map_err(|e| Error::io(&p, e));
        let events = path("events.csv");
        let mut log =
            EventLog::new(open(events.clone())?, Some(open(path("state.csv"))?)).map_err(|e| Error::io(&events, e))?;
        experiment.run_observed(run, summary.runs[run].seed, &mut log)?;
        log.finish().map_err(|e| Error::io(&events, e))?;
    }
    manifest.write(&path("manifest.json"))?;

    let manipulated = summary.runs.first().map(|r| r.manipulated_rounds).unwrap_or(0);
    let mut line = format!(
        "attack={} runs={} mean_final_regret={:.1} std_final_regret={:.1} manipulated_rounds={}",
        config.attack.name(),
        summary.runs.len(),
        summary.mean_final_regret,
        summary.std_final_regret,
        manipulated
    );
    if config.targets.is_some() {
        line.push_str(&format!(
            " success={}/{} (coverage >= {SUCCESS_FRACTION})",
            summary.success_runs,
            summary.runs.len()
        ));
    }
    println!("{line} manifest={}", manifest.id);
    Ok(())
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    if a.horizons.is_empty() {
        return Err(Error::Config("empty horizon list".into()));
    }
    let (mut file, workers) = resolve(&a.common)?;
    let mut experiments = Vec::with_capacity(a.horizons.len());
    for &horizon in &a.horizons {
        file.horizon = Some(horizon);
        experiments.push(Experiment::new(file.resolve()?)?);
    }
    let base = experiments[0].config().clone();
    let schedules = experiments.iter().map(|e| schedule_record(e.attack())).collect();
    let mut manifest = RunManifest::new("sweep", &base, Some(a.horizons.clone()), schedules);
    let out = &a.common.out;
    create_dir(out)?;

    let mut rows = Vec::with_capacity(experiments.len());
    for e in &experiments {
        let summary = e.run_many(workers)?;
        let row = SweepRow::new(e.config().horizon, e.attack(), &summary);
        println!(
            "horizon={} manipulated_rounds={} mean_final_regret={:.1}",
            row.horizon, row.manipulated_rounds, row.mean_final_regret
        );
        rows.push(row);
    }
    write_sweep_csv(&out.join(format!("{}.csv", a.name)), &manifest.id, &rows)?;
    manifest.write(&out.join(format!("{}.manifest.json", a.name)))?;
    println!("manifest={}", manifest.id);
    Ok(())
}

pub fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let profile = match (&a.builtin, &a.input) {
        (Some(name), _) => AttractionProfile::builtin(name)
            .ok_or_else(|| Error::Config(format!("unknown built-in profile `{name}`")))?,
        (None, Some(input)) => {
            let table = parse_movielens(input, a.format.into())?;
            let probs = attraction_probs(&table, a.threshold, a.min_count)?;
            let mode = match (&a.ids, a.top_variance, a.sample_seed) {
                (Some(ids), _, _) => SelectionMode::GivenIds(ids.clone()),
                (None, _, Some(seed)) => SelectionMode::SeededArbitrary(seed),
                _ => SelectionMode::TopVariance,
            };
            eprintln!(
                "parsed {} ratings, skipped {} malformed rows, {} movies with at least {} ratings",
                table.records.len(),
                table.skipped,
                probs.len(),
                a.min_count
            );
            select_profile(&probs, a.l, &mode)?
        }
        (None, None) => return Err(Error::Config("ingest needs --input or --builtin".into())),
    };
    write_profile(&profile, &a.output)?;
    println!("wrote {} items to {}", profile.len(), a.output.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(args: &[&str]) -> Result<String> {
        let mut full = vec!["oltr-sim", "params"];
        full.extend_from_slice(args);
        match Cli::try_parse_from(full).unwrap().command {
            Command::Params(a) => cmd_params(&a),
            _ => unreachable!(),
        }
    }

    #[test]
    fn cascade_params_reference() {
        let text = params(&[
            "--model", "cascade", "--alpha", "1.5", "-T", "500000", "-k", "3", "-l", "10", "--w-m", "0.08",
        ])
        .unwrap();
        assert!(text.contains("T1=10260\n"));
        assert!(text.contains("T2=1005\n"));
    }

    #[test]
    fn pbm_params_reference_note() {
        let text = params(&[
            "--model",
            "pbm",
            "--alpha",
            "1.5",
            "-T",
            "500000",
            "-k",
            "3",
            "-l",
            "10",
            "--w-m",
            "0.08",
            "--bias",
            "0.95,0.90,0.85",
        ])
        .unwrap();
        assert!(text.contains("T1=17728\n"));
        assert!(text.contains("T2=6876\n"));
        assert!(text.contains("reported_T1=11507\n"));
        assert!(text.contains("reported_T2=1304\n"));
    }

    #[test]
    fn params_denominator_error() {
        let err = params(&[
            "--model", "cascade", "--alpha", "1.5", "-T", "500000", "-k", "3", "-l", "10", "--w-m", "0.4",
        ])
        .unwrap_err();
        assert!(matches!(err, Error::NonPositiveDenominator(_)));
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_cli(["oltr-sim", "params", "--model", "nope"]), 1);
        assert_eq!(run_cli(["oltr-sim", "--help"]), 0);
    }
}
