use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

use vaimpute::audit::RocVariant;
use vaimpute::experiments::Scenario;
use vaimpute::{Algorithm, Denominator, DEFAULT_CLAMP};

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (file format 1)");

#[derive(Debug, Parser)]
#[command(name = "vaimpute", version = VERSION, about = "Audit verbal autopsy probbases by held-out block imputation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Seed for every random draw; overrides seeds in config files.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (0 = all cores). Outputs do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Probbase values are clamped into [eps, 1 - eps] on load.
    #[arg(long, global = true, default_value_t = DEFAULT_CLAMP)]
    pub eps_clamp: f64,

    /// More log output (-v info, -vv debug, -vvv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw interviews from the latent Gaussian probit model.
    Simulate(SimulateArgs),
    /// Compute the held-out imputation loss of a probbase.
    Score(ScoreArgs),
    /// Finite-difference sensitivity of the loss to each probbase entry.
    Audit(AuditArgs),
    /// Lower the loss by coordinate descent over probbase entries.
    Optimize(OptimizeArgs),
    /// Learn a block partition from answer correlations.
    Blocks(BlocksArgs),
    /// ROC curve points from an audit report with known truth.
    Roc(RocArgs),
    /// Run a scripted validation experiment.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlgorithmArg {
    Interva4,
    NaiveBayes,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Interva4 => Algorithm::InterVa4,
            AlgorithmArg::NaiveBayes => Algorithm::NaiveBayes,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DenominatorArg {
    Scored,
    Ns,
}

impl From<DenominatorArg> for Denominator {
    fn from(d: DenominatorArg) -> Self {
        match d {
            DenominatorArg::Scored => Denominator::Scored,
            DenominatorArg::Ns => Denominator::All,
        }
    }
}

/// Inputs shared by every command that scores a probbase.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Answers CSV: header of question labels, cells 1/0/NA/empty.
    #[arg(long)]
    pub answers: PathBuf,
    /// Prior CSV (`cause,prior`); uniform when omitted.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    /// Partition CSV (`question,block`); one block per question when omitted.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// Letter-code table; the probbase cells are then codes, not numbers.
    #[arg(long)]
    pub letter_codes: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "interva4")]
    pub algorithm: AlgorithmArg,
    #[arg(long, value_enum, default_value = "scored")]
    pub denominator: DenominatorArg,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML config; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub probbase: Option<PathBuf>,
    #[arg(long)]
    pub letter_codes: Option<PathBuf>,
    #[arg(long)]
    pub prior: Option<PathBuf>,
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// `diagonal`, `exchangeable:RHO`, or a covariance CSV.
    #[arg(long)]
    pub covariance: Option<String>,
    #[arg(short, long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub missing_rate: Option<f64>,
    /// Also write random ages and sexes.
    #[arg(long)]
    pub demographics: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub probbase: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Report CSV with the overall value and per-block losses.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-cell CSV of imputed probabilities.
    #[arg(long)]
    pub cells: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Full,
    Incremental,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub probbase: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Finite-difference half width.
    #[arg(long, default_value_t = vaimpute::audit::DEFAULT_EPS)]
    pub eps: f64,
    /// Flag entries with |gamma| above this.
    #[arg(long, default_value_t = vaimpute::audit::DEFAULT_TAU, conflicts_with = "top_fraction")]
    pub tau: f64,
    /// Flag this fraction of entries with the largest |gamma| instead.
    #[arg(long)]
    pub top_fraction: Option<f64>,
    #[arg(long, value_enum, default_value = "full")]
    pub mode: ModeArg,
    /// Entry list CSV (`cause,question`); all entries when omitted.
    #[arg(long)]
    pub entries: Option<PathBuf>,
    /// Known perturbation signs, laid out like the probbase.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Report CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Metrics CSV (needs --truth).
    #[arg(long, requires = "truth")]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Starting probbase.
    #[arg(long, required_unless_present = "allow_cold_start")]
    pub probbase: Option<PathBuf>,
    /// Start from a random probbase when no --probbase is given.
    #[arg(long)]
    pub allow_cold_start: bool,
    #[command(flatten)]
    pub data: DataArgs,
    /// Entry list CSV (`cause,question`).
    #[arg(long, conflicts_with = "flagged")]
    pub entries: Option<PathBuf>,
    /// Move only the entries flagged in this audit report.
    #[arg(long)]
    pub flagged: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub initial_step: f64,
    #[arg(long, default_value_t = 0.5)]
    pub shrink: f64,
    #[arg(long, default_value_t = 10)]
    pub max_sweeps: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub tolerance: f64,
    #[arg(long, default_value_t = vaimpute::audit::DEFAULT_EPS)]
    pub eps: f64,
    /// Optimized probbase CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Trace CSV of accepted steps.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LinkageArg {
    Average,
    Complete,
}

#[derive(Debug, Args)]
pub struct BlocksArgs {
    #[arg(long)]
    pub answers: PathBuf,
    #[arg(long, value_enum, default_value = "average")]
    pub linkage: LinkageArg,
    /// Number of blocks.
    #[arg(
        short = 'b',
        long = "blocks",
        required_unless_present = "height",
        conflicts_with = "height"
    )]
    pub n_blocks: Option<usize>,
    /// Cut height on the 1 - |r| scale.
    #[arg(long)]
    pub height: Option<f64>,
    /// Partition CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Cause labels (`interview,cause`) for per-cause block covariances.
    #[arg(long, requires = "covariance_out")]
    pub causes: Option<PathBuf>,
    /// Prior CSV fixing the cause label order.
    #[arg(long, requires = "causes")]
    pub prior: Option<PathBuf>,
    /// Covariance CSV written when --causes is given.
    #[arg(long, requires = "causes")]
    pub covariance_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    PosVsNeg,
    PosVsZero,
    NegVsZero,
}

impl From<VariantArg> for RocVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::PosVsNeg => RocVariant::PosVsNeg,
            VariantArg::PosVsZero => RocVariant::PosVsZero,
            VariantArg::NegVsZero => RocVariant::NegVsZero,
        }
    }
}

#[derive(Debug, Args)]
pub struct RocArgs {
    /// Audit report CSV with a truth column.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, value_enum, default_value = "pos-vs-neg")]
    pub variant: VariantArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScenarioArg {
    Table1,
    ResampleQ4,
    SignedOffsetAudit,
    Lemma1Check,
    Theorem1Check,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Table1 => Scenario::Table1,
            ScenarioArg::ResampleQ4 => Scenario::ResampleQ4,
            ScenarioArg::SignedOffsetAudit => Scenario::SignedOffsetAudit,
            ScenarioArg::Lemma1Check => Scenario::Lemma1Check,
            ScenarioArg::Theorem1Check => Scenario::Theorem1Check,
        }
    }
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Scenario; may instead be given in the config file.
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioArg>,
    /// TOML config with any experiment fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Interviews per simulated dataset.
    #[arg(short, long)]
    pub n: Option<usize>,
    /// Independent repetitions.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Invalid combination of arguments found after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub enum Outcome {
    Ok,
    BandFailure,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp
                | clap::error::ErrorKind::DisplayVersion
                | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {} threads: {e}", cli.threads);
            return ExitCode::from(2);
        }
    };
    match pool.install(|| commands::run(&cli)) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::BandFailure) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn describe(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let part = cause.to_string();
        if !msg.contains(&part) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&part);
        }
    }
    msg
}
