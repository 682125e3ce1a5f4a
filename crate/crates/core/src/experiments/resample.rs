//! How often a fresh sparse perturbation scores worse than the truth.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{prepare, wilson_interval, Check, ExperimentConfig};
use crate::audit::{perturb_probbase, PerturbationKind, PerturbationSpec};
use crate::error::Result;
use crate::io::write_records;
use crate::rng::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResampleDraw {
    pub draw: usize,
    pub sd: f64,
    pub perturbed: f64,
    pub truth: f64,
    /// 1 if the perturbation scores worse, 0.5 on an exact tie.
    pub detected: f64,
}

#[derive(Clone, Debug)]
pub struct ResampleResult {
    pub draws: Vec<ResampleDraw>,
    /// Same draws with zero noise; ties count one half.
    pub null_draws: Vec<ResampleDraw>,
}

fn fraction(draws: &[ResampleDraw]) -> f64 {
    draws.iter().map(|d| d.detected).sum::<f64>() / draws.len() as f64
}

/// Scores `repeats` independent sparse perturbations of the truth on one dataset.
pub fn run_resample_q4(cfg: &ExperimentConfig, repeats: usize) -> Result<ResampleResult> {
    cfg.validate()?;
    if repeats == 0 {
        return Err(crate::error::Error::Parameter(
            "repeats must be at least 1".into(),
        ));
    }
    let prep = prepare(cfg, cfg.seed)?;
    let alg = cfg.algorithm;
    let ctx = prep.context(&alg, cfg)?;
    let truth = ctx.objective(&prep.inst.probbase)?;
    let draw = |i: usize, sd: f64| -> Result<ResampleDraw> {
        let kind = PerturbationKind::SparseGaussian {
            count: cfg.sparse_count,
            sd,
        };
        let spec = PerturbationSpec::new(kind, derive_seed(cfg.seed, 100 + i as u64));
        let pb = perturb_probbase(&prep.inst.probbase, &spec, cfg.clamp)?.probbase;
        let perturbed = ctx.objective(&pb)?;
        let detected = if perturbed > truth {
            1.0
        } else if perturbed == truth {
            0.5
        } else {
            0.0
        };
        Ok(ResampleDraw {
            draw: i,
            sd,
            perturbed,
            truth,
            detected,
        })
    };
    let draws = (0..repeats)
        .map(|i| draw(i, cfg.sparse_sd))
        .collect::<Result<Vec<_>>>()?;
    let null_draws = (0..repeats)
        .map(|i| draw(i, 0.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResampleResult { draws, null_draws })
}

impl ResampleResult {
    pub fn detection_rate(&self) -> f64 {
        fraction(&self.draws)
    }

    pub fn null_rate(&self) -> f64 {
        fraction(&self.null_draws)
    }

    pub fn interval(&self) -> (f64, f64) {
        wilson_interval(
            self.draws.iter().map(|d| d.detected).sum(),
            self.draws.len(),
        )
    }

    pub(crate) fn lines(&self) -> Vec<String> {
        let (lo, hi) = self.interval();
        vec![
            format!("draws: {}", self.draws.len()),
            format!(
                "detection rate: {:.4} (95% CI {lo:.4} to {hi:.4})",
                self.detection_rate()
            ),
            format!("zero-noise sanity rate: {:.4}", self.null_rate()),
        ]
    }

    /// The required rate grows with the dataset size.
    pub(crate) fn checks(&self, n: usize) -> Vec<Check> {
        let min = if n >= 10_000 { 0.85 } else { 0.75 };
        vec![
            Check::at_least("detection_rate", self.detection_rate(), min),
            Check::within("zero_noise_rate", self.null_rate(), 0.5, 0.5),
        ]
    }

    pub(crate) fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let a = dir.join("resample_q4.csv");
        write_records(&a, &self.draws)?;
        let b = dir.join("resample_q4_zero_noise.csv");
        write_records(&b, &self.null_draws)?;
        Ok(vec![a, b])
    }
}
