//! Objective values of the truth and four perturbed probbases on one dataset.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{prepare, Check, ExperimentConfig};
use crate::audit::{perturb_probbase, PerturbationKind, PerturbationSpec};
use crate::error::Result;
use crate::io::write_records;
use crate::rng::derive_seed;

/// Column order of every run: the four perturbations, then the truth.
pub const TABLE1_NAMES: [&str; 5] = [
    "chaotic",
    "shuffled",
    "global_gaussian",
    "sparse_gaussian",
    "truth",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table1Run {
    pub run: usize,
    pub seed: u64,
    pub chaotic: f64,
    pub shuffled: f64,
    pub global_gaussian: f64,
    pub sparse_gaussian: f64,
    pub truth: f64,
    /// `chaotic > shuffled > global > sparse >= truth`.
    pub ordered: bool,
    pub chaotic_over_truth: f64,
}

impl Table1Run {
    pub fn values(&self) -> [f64; 5] {
        [
            self.chaotic,
            self.shuffled,
            self.global_gaussian,
            self.sparse_gaussian,
            self.truth,
        ]
    }
}

#[derive(Clone, Debug)]
pub struct Table1Result {
    pub runs: Vec<Table1Run>,
}

pub(crate) fn perturbation_kinds(cfg: &ExperimentConfig) -> [PerturbationKind; 4] {
    [
        PerturbationKind::Chaotic,
        PerturbationKind::Shuffled,
        PerturbationKind::GlobalGaussian { sd: cfg.global_sd },
        PerturbationKind::SparseGaussian {
            count: cfg.sparse_count,
            sd: cfg.sparse_sd,
        },
    ]
}

pub fn run_table1(cfg: &ExperimentConfig) -> Result<Table1Result> {
    cfg.validate()?;
    let mut runs = Vec::with_capacity(cfg.runs);
    for run in 0..cfg.runs {
        let seed = derive_seed(cfg.seed, run as u64);
        let prep = prepare(cfg, seed)?;
        let alg = cfg.algorithm;
        let ctx = prep.context(&alg, cfg)?;
        let mut v = [0.0; 5];
        for (i, kind) in perturbation_kinds(cfg).into_iter().enumerate() {
            let spec = PerturbationSpec::new(kind, derive_seed(seed, 10 + i as u64));
            let pb = perturb_probbase(&prep.inst.probbase, &spec, cfg.clamp)?.probbase;
            v[i] = ctx.objective(&pb)?;
        }
        v[4] = ctx.objective(&prep.inst.probbase)?;
        let ordered = v[0] > v[1] && v[1] > v[2] && v[2] > v[3] && v[3] >= v[4];
        log::info!("table run {run}: {v:?} ordered={ordered}");
        runs.push(Table1Run {
            run,
            seed,
            chaotic: v[0],
            shuffled: v[1],
            global_gaussian: v[2],
            sparse_gaussian: v[3],
            truth: v[4],
            ordered,
            chaotic_over_truth: v[0] / v[4],
        });
    }
    Ok(Table1Result { runs })
}

impl Table1Result {
    pub fn ordered_fraction(&self) -> f64 {
        self.runs.iter().filter(|r| r.ordered).count() as f64 / self.runs.len() as f64
    }

    /// Smallest chaotic-to-truth ratio over the ordered runs.
    pub fn min_ratio_when_ordered(&self) -> Option<f64> {
        self.runs
            .iter()
            .filter(|r| r.ordered)
            .map(|r| r.chaotic_over_truth)
            .reduce(f64::min)
    }

    pub(crate) fn lines(&self) -> Vec<String> {
        let mut out = vec![format!("runs: {}", self.runs.len())];
        if let Some(r) = self.runs.first() {
            for (name, v) in TABLE1_NAMES.iter().zip(r.values()) {
                out.push(format!("run 0 {name}: {v:.6}"));
            }
        }
        out
    }

    pub(crate) fn checks(&self) -> Vec<Check> {
        vec![
            Check::at_least("ordered_fraction", self.ordered_fraction(), 0.95),
            Check::at_least(
                "min_chaotic_over_truth",
                self.min_ratio_when_ordered().unwrap_or(f64::NAN),
                3.0,
            ),
        ]
    }

    pub(crate) fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let path = dir.join("table1.csv");
        write_records(&path, &self.runs)?;
        Ok(vec![path])
    }
}
