//! Scripted validation experiments on synthetic desk-scale instances.
//!
//! Each scenario is reproducible from its config and seed, writes plain CSV
//! plot data plus a `summary.txt`, and reports pass/fail against fixed
//! acceptance bands.

mod oracle;
mod resample;
mod signed_offset;
mod table1;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imputation::{Denominator, ScoringContext};
use crate::model::{default_labels, BlockPartition, Prior, Probbase, DEFAULT_CLAMP};
use crate::rng::derive_seed;
use crate::simulate::{simulate_dataset, CovarianceModel, SimulatedData, SimulationConfig};
use crate::va::Algorithm;

pub use oracle::{
    lemma1_check, theorem1_check, tiny_instance, BootstrapSummary, Lemma1Result, Theorem1Result,
    Theorem1Trial,
};
pub use resample::{run_resample_q4, ResampleResult};
pub use signed_offset::{run_signed_offset_audit, SignedOffsetResult, DENSITY_BINS};
pub use table1::{run_table1, Table1Result, Table1Run, TABLE1_NAMES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Table1,
    ResampleQ4,
    SignedOffsetAudit,
    Lemma1Check,
    Theorem1Check,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Self::Table1,
        Self::ResampleQ4,
        Self::SignedOffsetAudit,
        Self::Lemma1Check,
        Self::Theorem1Check,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Table1 => "table1",
            Self::ResampleQ4 => "resample_q4",
            Self::SignedOffsetAudit => "signed_offset_audit",
            Self::Lemma1Check => "lemma1_check",
            Self::Theorem1Check => "theorem1_check",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown scenario '{s}'")))
    }
}

/// Instance dimensions for the synthetic generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeskScale {
    pub causes: usize,
    pub questions: usize,
    pub blocks: usize,
    /// Exchangeable latent correlation within each block.
    pub within_correlation: f64,
    /// Share of probbase entries drawn from the high band.
    pub high_share: f64,
    /// Prior weights are log-uniform over this many decades.
    pub prior_decades: f64,
}

impl Default for DeskScale {
    fn default() -> Self {
        Self {
            causes: 15,
            questions: 60,
            blocks: 12,
            within_correlation: 0.3,
            high_share: 0.15,
            prior_decades: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Interviews per simulated dataset.
    pub n: usize,
    pub scale: DeskScale,
    pub seed: u64,
    /// Independent seeded repetitions of the table scenario.
    pub runs: usize,
    /// Fresh perturbation draws (resampling) or bootstrap datasets (unbiasedness check).
    pub repeats: usize,
    /// Random perturbations in the truth-minimizes check.
    pub trials: usize,
    pub algorithm: Algorithm,
    pub denominator: Denominator,
    pub missing_rate: f64,
    pub clamp: f64,
    pub global_sd: f64,
    pub sparse_count: usize,
    pub sparse_sd: f64,
    pub offset: f64,
    pub eligibility: f64,
    pub eps: f64,
    pub tau: f64,
    /// Share of entries flagged by the scale-matched rule.
    pub flag_share: f64,
    /// Largest perturbation magnitude in the truth-minimizes check.
    pub magnitude: f64,
    /// Dataset sizes of the unbiasedness check.
    pub small_n: usize,
    pub large_n: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Table1,
            n: 1500,
            scale: DeskScale::default(),
            seed: 1,
            runs: 1,
            repeats: 50,
            trials: 100,
            algorithm: Algorithm::InterVa4,
            denominator: Denominator::Scored,
            missing_rate: 0.0,
            clamp: DEFAULT_CLAMP,
            global_sd: 0.05,
            sparse_count: 20,
            sparse_sd: 0.05,
            offset: 0.2,
            eligibility: 0.2,
            eps: 0.01,
            tau: 0.2,
            flag_share: 0.085,
            magnitude: 0.3,
            small_n: 50,
            large_n: 200,
        }
    }
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario) -> Self {
        let mut cfg = Self {
            scenario,
            ..Self::default()
        };
        match scenario {
            Scenario::Table1 => cfg.runs = 100,
            Scenario::SignedOffsetAudit => cfg.runs = 4,
            Scenario::Lemma1Check => cfg.repeats = 1000,
            _ => {}
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scale;
        let bad = |m: String| Err(Error::Parameter(m));
        if self.n == 0 || s.causes == 0 || s.questions == 0 || s.blocks == 0 {
            return bad("experiment scale must be positive".into());
        }
        if s.blocks > s.questions {
            return bad(format!(
                "{} blocks exceed {} questions",
                s.blocks, s.questions
            ));
        }
        if self.runs == 0 || self.repeats == 0 || self.trials == 0 {
            return bad("runs, repeats and trials must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return bad(format!("missing rate {} outside [0, 1)", self.missing_rate));
        }
        if !(self.clamp > 0.0 && self.clamp < 0.5) {
            return bad(format!("clamp {} outside (0, 0.5)", self.clamp));
        }
        if !(0.0..=1.0).contains(&s.high_share)
            || !(s.within_correlation > -1.0 && s.within_correlation < 1.0)
            || !(s.prior_decades >= 0.0 && s.prior_decades.is_finite())
        {
            return bad("scale shares and correlations out of range".into());
        }
        if self.small_n == 0 || self.large_n == 0 {
            return bad("bootstrap sizes must be positive".into());
        }
        Ok(())
    }
}

/// Generating model of one synthetic experiment.
#[derive(Clone, Debug)]
pub struct SyntheticInstance {
    pub probbase: Probbase<f64>,
    pub prior: Prior<f64>,
    pub partition: BlockPartition,
    pub covariance: CovarianceModel,
}

/// Probbase with a high band `U(0.25, 0.75)` and a low band log-uniform on
/// `[0.002, 0.15]`, mimicking the mix of likely and rare symptoms of real
/// tables. Prior weights are evenly spaced in log over `prior_decades`, so a
/// few causes dominate. Blocks are contiguous with exchangeable correlation.
pub fn synthetic_instance(scale: &DeskScale, seed: u64) -> Result<SyntheticInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (r, s) = (scale.causes, scale.questions);
    let (lo, hi) = (0.002f64.ln(), 0.15f64.ln());
    let values: Vec<f64> = (0..r * s)
        .map(|_| {
            if rng.random::<f64>() < scale.high_share {
                rng.random_range(0.25..0.75)
            } else {
                rng.random_range(lo..hi).exp()
            }
        })
        .collect();
    let probbase = Probbase::new(default_labels("cause", r), default_labels("q", s), values)?;
    let weights: Vec<f64> = (0..r)
        .map(|j| 10f64.powf(-scale.prior_decades * j as f64 / (r.max(2) - 1) as f64))
        .collect();
    let total: f64 = weights.iter().sum();
    let prior = Prior::new(
        probbase.cause_labels().to_vec(),
        weights.iter().map(|w| w / total).collect(),
    )?;
    let partition = BlockPartition::contiguous(s, scale.blocks)?;
    let covariance = CovarianceModel::exchangeable(r, &partition, scale.within_correlation)?;
    Ok(SyntheticInstance {
        probbase,
        prior,
        partition,
        covariance,
    })
}

/// An instance and one dataset drawn from it.
pub(crate) struct Prepared {
    pub inst: SyntheticInstance,
    pub data: SimulatedData,
}

pub(crate) fn prepare(cfg: &ExperimentConfig, seed: u64) -> Result<Prepared> {
    let inst = synthetic_instance(&cfg.scale, derive_seed(seed, 1))?;
    let sim = SimulationConfig::new(
        cfg.n,
        inst.probbase.clone(),
        inst.prior.clone(),
        inst.partition.clone(),
        inst.covariance.clone(),
        derive_seed(seed, 2),
    )
    .with_missing_rate(cfg.missing_rate);
    let data = simulate_dataset(&sim)?;
    Ok(Prepared { inst, data })
}

impl Prepared {
    pub fn context<'a>(
        &'a self,
        alg: &'a Algorithm,
        cfg: &ExperimentConfig,
    ) -> Result<ScoringContext<'a, f64>> {
        Ok(ScoringContext::new(
            &self.data.answers,
            &self.inst.prior,
            &self.inst.partition,
            alg,
        )?
        .with_denominator(cfg.denominator))
    }
}

/// One acceptance band and its outcome.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub band: String,
    pub pass: bool,
}

impl Check {
    pub fn at_least(name: &str, value: f64, min: f64) -> Self {
        Self {
            name: name.into(),
            value,
            band: format!(">= {min}"),
            pass: value >= min,
        }
    }

    pub fn at_most(name: &str, value: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            value,
            band: format!("<= {max}"),
            pass: value <= max,
        }
    }

    pub fn within(name: &str, value: f64, min: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            value,
            band: format!("[{min}, {max}]"),
            pass: (min..=max).contains(&value),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub scenario: Scenario,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

impl ExperimentOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn render_summary(cfg: &ExperimentConfig, lines: &[String], checks: &[Check]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", cfg.scenario.as_str());
    match cfg.scenario {
        Scenario::Lemma1Check => {
            let _ = writeln!(
                out,
                "instance: 2 causes, 4 questions  seed: {}  algorithm: {}",
                cfg.seed, cfg.algorithm
            );
        }
        Scenario::Theorem1Check => {
            let _ = writeln!(
                out,
                "instance: 2 causes, 4 questions  seed: {}  algorithm: naive_bayes",
                cfg.seed
            );
        }
        _ => {
            let _ = writeln!(
                out,
                "n: {}  causes: {}  questions: {}  blocks: {}  runs: {}  seed: {}  algorithm: {}",
                cfg.n,
                cfg.scale.causes,
                cfg.scale.questions,
                cfg.scale.blocks,
                cfg.runs,
                cfg.seed,
                cfg.algorithm
            );
        }
    }
    for l in lines {
        let _ = writeln!(out, "{l}");
    }
    for c in checks {
        let _ = writeln!(
            out,
            "[{}] {} = {:.6} (band {})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.band
        );
    }
    let verdict = if checks.iter().all(|c| c.pass) {
        "PASS"
    } else {
        "FAIL"
    };
    let _ = writeln!(out, "overall: {verdict}");
    out
}

/// Runs the configured scenario, writing its CSVs and `summary.txt` into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let (lines, checks, files) = match cfg.scenario {
        Scenario::Table1 => {
            let res = run_table1(cfg)?;
            let files = res.write(out_dir)?;
            (res.lines(), res.checks(), files)
        }
        Scenario::ResampleQ4 => {
            let res = run_resample_q4(cfg, cfg.repeats)?;
            let files = res.write(out_dir)?;
            (res.lines(), res.checks(cfg.n), files)
        }
        Scenario::SignedOffsetAudit => {
            let res = run_signed_offset_audit(cfg)?;
            let files = res.write(out_dir)?;
            (res.lines(), res.checks(), files)
        }
        Scenario::Lemma1Check => {
            let res = lemma1_check(cfg)?;
            let files = res.write(out_dir)?;
            (res.lines(), res.checks(), files)
        }
        Scenario::Theorem1Check => {
            let res = theorem1_check(cfg)?;
            let files = res.write(out_dir)?;
            (res.lines(), res.checks(), files)
        }
    };
    let summary = render_summary(cfg, &lines, &checks);
    let path = out_dir.join("summary.txt");
    std::fs::write(&path, &summary).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    let mut files = files;
    files.push(path);
    Ok(ExperimentOutcome {
        scenario: cfg.scenario,
        checks,
        files,
        summary,
    })
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: f64, n: usize) -> (f64, f64) {
    let z = 1.959_963_984_540_054;
    let n = n as f64;
    let p = successes / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}
