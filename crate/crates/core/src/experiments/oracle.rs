//! Checks against exact enumeration on a four-question instance: the sample
//! objective averages to the population value, and the true probbase
//! minimizes the population value.

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{Check, ExperimentConfig, SyntheticInstance};
use crate::error::Result;
use crate::imputation::ScoringContext;
use crate::io::write_records;
use crate::model::{BlockPartition, Prior, Probbase};
use crate::rng::{derive_seed, stream};
use crate::simulate::{exact_tiny_distribution, CovarianceModel, ExactDistribution};
use crate::va::Algorithm;

/// Lowest and highest probbase value a random perturbation may produce.
const PERTURB_RANGE: (f64, f64) = (0.01, 0.99);
const VIOLATION_SLACK: f64 = 1e-12;

/// Two causes, four questions in two correlated pairs.
pub fn tiny_instance() -> Result<SyntheticInstance> {
    let probbase = Probbase::unlabelled(2, 4, vec![0.7, 0.3, 0.6, 0.8, 0.25, 0.65, 0.3, 0.4])?;
    let prior = Prior::new(probbase.cause_labels().to_vec(), vec![0.45, 0.55])?;
    let partition = BlockPartition::new(4, vec![vec![0, 1], vec![2, 3]])?;
    let covariance = CovarianceModel::exchangeable(2, &partition, 0.4)?;
    Ok(SyntheticInstance {
        probbase,
        prior,
        partition,
        covariance,
    })
}

fn exact_objective(
    dist: &ExactDistribution,
    inst: &SyntheticInstance,
    alg: &Algorithm,
    cfg: &ExperimentConfig,
    pb: &Probbase<f64>,
) -> Result<f64> {
    ScoringContext::new(&dist.patterns, &inst.prior, &inst.partition, alg)?
        .with_denominator(cfg.denominator)
        .with_weights(&dist.marginal)?
        .objective(pb)
}

#[derive(Clone, Debug, Serialize)]
pub struct BootstrapSummary {
    pub n: usize,
    pub repeats: usize,
    pub mean: f64,
    pub se: f64,
    pub rms_deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
struct BootstrapRow {
    n: usize,
    repeat: usize,
    objective: f64,
}

#[derive(Clone, Debug)]
pub struct Lemma1Result {
    pub exact: f64,
    pub small: BootstrapSummary,
    pub large: BootstrapSummary,
    rows: Vec<BootstrapRow>,
}

fn bootstrap(
    dist: &ExactDistribution,
    inst: &SyntheticInstance,
    alg: &Algorithm,
    cfg: &ExperimentConfig,
    n: usize,
    seed: u64,
    exact: f64,
) -> Result<(BootstrapSummary, Vec<BootstrapRow>)> {
    let values: Vec<f64> = (0..cfg.repeats)
        .into_par_iter()
        .map(|rep| {
            let answers = dist.sample(n, &mut stream(seed, rep as u64))?;
            ScoringContext::new(&answers, &inst.prior, &inst.partition, alg)?
                .with_denominator(cfg.denominator)
                .objective(&inst.probbase)
        })
        .collect::<Result<_>>()?;
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let rms = (values.iter().map(|v| (v - exact).powi(2)).sum::<f64>() / m).sqrt();
    let rows = values
        .iter()
        .enumerate()
        .map(|(repeat, &objective)| BootstrapRow {
            n,
            repeat,
            objective,
        })
        .collect();
    Ok((
        BootstrapSummary {
            n,
            repeats: cfg.repeats,
            mean,
            se: (var / m).sqrt(),
            rms_deviation: rms,
        },
        rows,
    ))
}

/// Bootstrap mean and spread of the objective at the true probbase against
/// its exact population value.
pub fn lemma1_check(cfg: &ExperimentConfig) -> Result<Lemma1Result> {
    cfg.validate()?;
    let inst = tiny_instance()?;
    let dist = exact_tiny_distribution(
        &inst.probbase,
        &inst.prior,
        &inst.partition,
        &inst.covariance,
        0.0,
    )?;
    let alg = cfg.algorithm;
    let exact = exact_objective(&dist, &inst, &alg, cfg, &inst.probbase)?;
    let (small, mut rows) = bootstrap(
        &dist,
        &inst,
        &alg,
        cfg,
        cfg.small_n,
        derive_seed(cfg.seed, 30),
        exact,
    )?;
    let (large, more) = bootstrap(
        &dist,
        &inst,
        &alg,
        cfg,
        cfg.large_n,
        derive_seed(cfg.seed, 31),
        exact,
    )?;
    rows.extend(more);
    Ok(Lemma1Result {
        exact,
        small,
        large,
        rows,
    })
}

impl Lemma1Result {
    pub fn rms_ratio(&self) -> f64 {
        self.large.rms_deviation / self.small.rms_deviation
    }

    /// Distance of the small-sample mean from the exact value in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.small.mean - self.exact).abs() / self.small.se
    }

    pub(crate) fn lines(&self) -> Vec<String> {
        let mut out = vec![format!("exact objective: {}", self.exact)];
        for b in [&self.small, &self.large] {
            out.push(format!(
                "n = {}: mean {} (se {}) rms deviation {} over {} datasets",
                b.n, b.mean, b.se, b.rms_deviation, b.repeats
            ));
        }
        out
    }

    pub(crate) fn checks(&self) -> Vec<Check> {
        vec![
            Check::at_most("mean_minus_exact_in_se", self.z_score(), 3.0),
            Check::at_most("rms_ratio_large_over_small", self.rms_ratio(), 0.6),
        ]
    }

    pub(crate) fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let p = dir.join("lemma1_bootstrap.csv");
        write_records(&p, &self.rows)?;
        let q = dir.join("lemma1_summary.csv");
        write_records(&q, &[self.small.clone(), self.large.clone()])?;
        Ok(vec![p, q])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Theorem1Trial {
    pub trial: usize,
    pub magnitude: f64,
    pub changed: usize,
    pub objective: f64,
    /// `I(perturbed) - I(truth)`; negative means a violation.
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct Theorem1Result {
    pub truth_objective: f64,
    pub trials: Vec<Theorem1Trial>,
}

/// Exact objective at the truth against random perturbations, with
/// independent questions and the naive Bayes algorithm.
pub fn theorem1_check(cfg: &ExperimentConfig) -> Result<Theorem1Result> {
    cfg.validate()?;
    let base = tiny_instance()?;
    let partition = BlockPartition::singletons(4);
    let covariance = CovarianceModel::diagonal(2, &partition);
    let inst = SyntheticInstance {
        partition,
        covariance,
        ..base
    };
    let dist = exact_tiny_distribution(
        &inst.probbase,
        &inst.prior,
        &inst.partition,
        &inst.covariance,
        0.0,
    )?;
    let alg = Algorithm::NaiveBayes;
    let truth_objective = exact_objective(&dist, &inst, &alg, cfg, &inst.probbase)?;
    let seed = derive_seed(cfg.seed, 40);
    let (lo, hi) = PERTURB_RANGE;
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream(seed, trial as u64);
            let magnitude = cfg.magnitude * (1.0 - rng.random::<f64>());
            let size = inst.probbase.values().len();
            let mut mask: Vec<bool> = (0..size).map(|_| rng.random_bool(0.5)).collect();
            if !mask.iter().any(|&m| m) {
                mask[rng.random_range(0..size)] = true;
            }
            let pb = inst.probbase.map(|j, k, v| {
                let delta = rng.random_range(-magnitude..=magnitude);
                if mask[j * 4 + k] {
                    (v + delta).clamp(lo, hi)
                } else {
                    v
                }
            })?;
            let objective = exact_objective(&dist, &inst, &alg, cfg, &pb)?;
            Ok(Theorem1Trial {
                trial,
                magnitude,
                changed: mask.iter().filter(|&&m| m).count(),
                objective,
                gap: objective - truth_objective,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Theorem1Result {
        truth_objective,
        trials,
    })
}

impl Theorem1Result {
    pub fn violations(&self) -> usize {
        self.trials
            .iter()
            .filter(|t| t.gap < -VIOLATION_SLACK)
            .count()
    }

    pub fn min_gap(&self) -> f64 {
        self.trials
            .iter()
            .map(|t| t.gap)
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn lines(&self) -> Vec<String> {
        vec![
            format!("exact objective at truth: {}", self.truth_objective),
            format!(
                "trials: {}  smallest gap: {}",
                self.trials.len(),
                self.min_gap()
            ),
        ]
    }

    pub(crate) fn checks(&self) -> Vec<Check> {
        vec![Check::at_most("violations", self.violations() as f64, 0.0)]
    }

    pub(crate) fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let p = dir.join("theorem1_trials.csv");
        write_records(&p, &self.trials)?;
        Ok(vec![p])
    }
}
