//! TOML config files for `simulate` and `experiment`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use vaimpute::experiments::{ExperimentConfig, Scenario};

use crate::UsageError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateFile {
    pub probbase: Option<PathBuf>,
    pub letter_codes: Option<PathBuf>,
    pub prior: Option<PathBuf>,
    pub partition: Option<PathBuf>,
    pub covariance: Option<String>,
    pub n: Option<usize>,
    pub missing_rate: Option<f64>,
    pub seed: Option<u64>,
    pub demographics: Option<bool>,
}

fn read_toml(path: &Path) -> Result<toml::Table> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid TOML in {}", path.display()))
}

/// Loads a simulate config, resolving relative paths against its directory.
pub fn load_simulate(path: &Path) -> Result<SimulateFile> {
    let table = read_toml(path)?;
    let mut file: SimulateFile = table
        .try_into()
        .with_context(|| format!("invalid simulate config {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for p in [
        &mut file.probbase,
        &mut file.letter_codes,
        &mut file.prior,
        &mut file.partition,
    ]
    .into_iter()
    .flatten()
    {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    if let Some(cov) = &mut file.covariance {
        if let CovarianceSpec::File(p) = CovarianceSpec::parse(cov)? {
            if p.is_relative() {
                *cov = base.join(p).to_string_lossy().into_owned();
            }
        }
    }
    Ok(file)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceSpec {
    Diagonal,
    Exchangeable(f64),
    File(PathBuf),
}

impl CovarianceSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("diagonal") {
            return Ok(Self::Diagonal);
        }
        if let Some(rho) = s.strip_prefix("exchangeable:") {
            let rho: f64 = rho
                .trim()
                .parse()
                .map_err(|_| UsageError(format!("bad correlation in covariance spec `{s}`")))?;
            return Ok(Self::Exchangeable(rho));
        }
        if s.is_empty() {
            bail!(UsageError("empty covariance spec".into()));
        }
        Ok(Self::File(PathBuf::from(s)))
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Per-scenario defaults, overlaid with the config file, then the flags.
pub fn load_experiment(
    path: Option<&Path>,
    scenario: Option<Scenario>,
) -> Result<ExperimentConfig> {
    let file = path.map(read_toml).transpose()?.unwrap_or_default();
    let from_file = match file.get("scenario") {
        Some(v) => Some(
            v.as_str()
                .ok_or_else(|| UsageError("`scenario` must be a string".into()))?
                .parse::<Scenario>()
                .map_err(|e| UsageError(e.to_string()))?,
        ),
        None => None,
    };
    let Some(scenario) = scenario.or(from_file) else {
        bail!(UsageError(
            "no scenario given (use --scenario or set it in the config)".into()
        ));
    };
    let mut table =
        toml::Table::try_from(ExperimentConfig::new(scenario)).context("serializing defaults")?;
    merge(&mut table, file);
    table.insert(
        "scenario".into(),
        toml::Value::String(scenario.as_str().into()),
    );
    let cfg: ExperimentConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| UsageError(format!("invalid experiment config: {e}")))?;
    Ok(cfg)
}
