//! Latent-Gaussian probit simulator.
//!
//! Per interview a cause `d_j` is drawn from the prior, then for every block
//! a latent `z ~ N(0, Sigma_jl)` with unit diagonal, and `A_k = 1` iff
//! `z_k <= Phi^{-1}(q_jk)`. Cells are finally blanked independently with
//! probability `missing_rate`. Each interview owns its own random stream, so
//! output does not depend on the thread count.

mod cholesky;
mod exact;
mod normal;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Answer, AnswerMatrix, BlockPartition, Prior, Probbase};
use crate::rng::stream;

pub use cholesky::{cholesky_psd, CholeskyFactor};
pub use exact::{
    bivariate_normal_cdf, exact_tiny_distribution, orthant_probability, ExactDistribution,
    MAX_STATES,
};
pub(crate) use normal::probit_threshold;
pub use normal::{log_normal_cdf, normal_cdf, normal_pdf, normal_quantile};

/// Per-(cause, block) correlation matrices with their Cholesky factors.
#[derive(Clone, Debug)]
pub struct CovarianceModel {
    n_causes: usize,
    block_sizes: Vec<usize>,
    /// Indexed `j * n_blocks + l`, each row-major `m x m`.
    matrices: Vec<Vec<f64>>,
    factors: Vec<CholeskyFactor>,
    diagonal: bool,
}

impl CovarianceModel {
    /// Independent answers given the cause.
    pub fn diagonal(n_causes: usize, part: &BlockPartition) -> Self {
        let mats = (0..n_causes)
            .flat_map(|_| part.blocks().iter().map(|b| identity(b.len())))
            .collect();
        Self::from_matrices(n_causes, part, mats).expect("identity blocks factor")
    }

    /// Constant within-block correlation `rho`, the same for every cause.
    pub fn exchangeable(n_causes: usize, part: &BlockPartition, rho: f64) -> Result<Self> {
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::Parameter(format!(
                "exchangeable correlation {rho} outside (-1, 1)"
            )));
        }
        let mats = (0..n_causes)
            .flat_map(|_| {
                part.blocks().iter().map(move |b| {
                    let m = b.len();
                    let mut a = vec![rho; m * m];
                    for i in 0..m {
                        a[i * m + i] = 1.0;
                    }
                    a
                })
            })
            .collect();
        Self::from_matrices(n_causes, part, mats)
    }

    /// Takes covariances (row-major, `j * n_blocks + l` order), rescales them
    /// to unit diagonal and repairs any that are not positive definite.
    pub fn from_matrices(
        n_causes: usize,
        part: &BlockPartition,
        mats: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let nb = part.n_blocks();
        if mats.len() != n_causes * nb {
            return Err(Error::Dimension {
                what: "covariance matrices",
                expected: n_causes * nb,
                found: mats.len(),
            });
        }
        let block_sizes: Vec<usize> = part.blocks().iter().map(Vec::len).collect();
        let mut matrices = Vec::with_capacity(mats.len());
        let mut factors = Vec::with_capacity(mats.len());
        let mut diagonal = true;
        for (idx, s) in mats.into_iter().enumerate() {
            let m = block_sizes[idx % nb];
            if s.len() != m * m {
                return Err(Error::Dimension {
                    what: "covariance block",
                    expected: m * m,
                    found: s.len(),
                });
            }
            let sd: Vec<f64> = (0..m).map(|i| s[i * m + i]).collect();
            if let Some(i) = sd.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::Parameter(format!(
                    "covariance for cause {} block {} has non-positive variance at position {i}",
                    idx / nb,
                    idx % nb
                )));
            }
            let mut c: Vec<f64> = (0..m * m)
                .map(|p| s[p] / (sd[p / m] * sd[p % m]).sqrt())
                .collect();
            for i in 0..m {
                c[i * m + i] = 1.0;
            }
            let mut f = cholesky_psd(&c, m)?;
            if f.ridge > 0.0 {
                log::warn!(
                    "covariance for cause {} block {} repaired with ridge {:e}",
                    idx / nb,
                    idx % nb,
                    f.ridge
                );
                let scale = 1.0 / (1.0 + f.ridge);
                for (p, v) in c.iter_mut().enumerate() {
                    if p / m != p % m {
                        *v *= scale;
                    }
                }
                let root = scale.sqrt();
                f.lower.iter_mut().for_each(|v| *v *= root);
            }
            diagonal &= c
                .iter()
                .enumerate()
                .all(|(p, &v)| p / m == p % m || v == 0.0);
            matrices.push(c);
            factors.push(f);
        }
        Ok(Self {
            n_causes,
            block_sizes,
            matrices,
            factors,
            diagonal,
        })
    }

    pub fn n_causes(&self) -> usize {
        self.n_causes
    }

    pub fn n_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    /// Correlation matrix `Sigma_jl`, row-major.
    pub fn matrix(&self, j: usize, l: usize) -> &[f64] {
        &self.matrices[j * self.n_blocks() + l]
    }

    pub fn factor(&self, j: usize, l: usize) -> &CholeskyFactor {
        &self.factors[j * self.n_blocks() + l]
    }

    /// Ridge applied to `Sigma_jl` during repair, zero if none.
    pub fn ridge(&self, j: usize, l: usize) -> f64 {
        self.factor(j, l).ridge
    }

    pub(crate) fn check_shape(&self, n_causes: usize, part: &BlockPartition) -> Result<()> {
        if self.n_causes != n_causes {
            return Err(Error::Dimension {
                what: "covariance causes",
                expected: n_causes,
                found: self.n_causes,
            });
        }
        let sizes: Vec<usize> = part.blocks().iter().map(Vec::len).collect();
        if sizes != self.block_sizes {
            return Err(Error::Partition(
                "covariance block sizes do not match the partition".into(),
            ));
        }
        Ok(())
    }
}

fn identity(m: usize) -> Vec<f64> {
    let mut a = vec![0.0; m * m];
    for i in 0..m {
        a[i * m + i] = 1.0;
    }
    a
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Female => "female",
            Sex::Male => "male",
        }
    }
}

/// Passthrough demographic fields; never scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographic {
    pub age: u32,
    pub sex: Sex,
}

#[derive(Clone, Debug)]
pub struct SimulationConfig {
    pub n: usize,
    pub probbase: Probbase<f64>,
    pub prior: Prior<f64>,
    pub partition: BlockPartition,
    pub covariance: CovarianceModel,
    pub missing_rate: f64,
    pub seed: u64,
    pub demographics: bool,
}

impl SimulationConfig {
    pub fn new(
        n: usize,
        probbase: Probbase<f64>,
        prior: Prior<f64>,
        partition: BlockPartition,
        covariance: CovarianceModel,
        seed: u64,
    ) -> Self {
        Self {
            n,
            probbase,
            prior,
            partition,
            covariance,
            missing_rate: 0.0,
            seed,
            demographics: false,
        }
    }

    pub fn with_missing_rate(mut self, rate: f64) -> Self {
        self.missing_rate = rate;
        self
    }

    pub fn with_demographics(mut self, on: bool) -> Self {
        self.demographics = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (r, s) = (self.probbase.n_causes(), self.probbase.n_questions());
        if self.prior.len() != r {
            return Err(Error::Dimension {
                what: "prior length",
                expected: r,
                found: self.prior.len(),
            });
        }
        for (j, (a, b)) in self
            .probbase
            .cause_labels()
            .iter()
            .zip(self.prior.cause_labels())
            .enumerate()
        {
            if a != b {
                return Err(Error::Label {
                    what: "prior cause",
                    index: j,
                    expected: a.clone(),
                    found: b.clone(),
                });
            }
        }
        if self.partition.n_questions() != s {
            return Err(Error::Dimension {
                what: "partition questions",
                expected: s,
                found: self.partition.n_questions(),
            });
        }
        self.covariance.check_shape(r, &self.partition)?;
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::Parameter(format!(
                "missing rate {} outside [0, 1)",
                self.missing_rate
            )));
        }
        Ok(())
    }
}

/// Simulated interviews with their hidden causes.
#[derive(Clone, Debug)]
pub struct SimulatedData {
    pub answers: AnswerMatrix,
    /// Cause index per interview.
    pub causes: Vec<usize>,
    pub cause_labels: Vec<String>,
    pub demographics: Option<Vec<Demographic>>,
}

impl SimulatedData {
    pub fn cause_label(&self, i: usize) -> &str {
        &self.cause_labels[self.causes[i]]
    }

    /// Interview count per cause.
    pub fn cause_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.cause_labels.len()];
        for &d in &self.causes {
            c[d] += 1;
        }
        c
    }
}

pub fn simulate_dataset(cfg: &SimulationConfig) -> Result<SimulatedData> {
    cfg.validate()?;
    let pb = &cfg.probbase;
    let (r, s) = (pb.n_causes(), pb.n_questions());
    let thresholds: Vec<f64> = pb.values().iter().map(|&q| probit_threshold(q)).collect();
    let mut cdf = Vec::with_capacity(r);
    let mut acc = 0.0;
    for &p in cfg.prior.probs() {
        acc += p;
        cdf.push(acc);
    }
    let blocks = cfg.partition.blocks();
    let cov = &cfg.covariance;

    let rows: Vec<(usize, Vec<Answer>, Option<Demographic>)> = (0..cfg.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg.seed, i as u64);
            let u = rng.random::<f64>() * acc;
            let j = cdf.partition_point(|&c| c <= u).min(r - 1);
            let mut row = vec![Answer::No; s];
            let mut e = Vec::new();
            let mut z = Vec::new();
            for (l, block) in blocks.iter().enumerate() {
                let m = block.len();
                e.clear();
                e.extend((0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
                z.resize(m, 0.0);
                cov.factor(j, l).apply(&e, &mut z);
                for (a, &k) in block.iter().enumerate() {
                    if z[a] <= thresholds[j * s + k] {
                        row[k] = Answer::Yes;
                    }
                }
            }
            if cfg.missing_rate > 0.0 {
                for cell in row.iter_mut() {
                    if rng.random::<f64>() < cfg.missing_rate {
                        *cell = Answer::Missing;
                    }
                }
            }
            let demo = cfg.demographics.then(|| Demographic {
                age: rng.random_range(0..=95),
                sex: if rng.random::<bool>() {
                    Sex::Female
                } else {
                    Sex::Male
                },
            });
            (j, row, demo)
        })
        .collect();

    let mut causes = Vec::with_capacity(cfg.n);
    let mut flat = Vec::with_capacity(cfg.n * s);
    let mut demos = cfg.demographics.then(|| Vec::with_capacity(cfg.n));
    for (j, row, demo) in rows {
        causes.push(j);
        flat.extend(row);
        if let (Some(d), Some(v)) = (demo, demos.as_mut()) {
            v.push(d);
        }
    }
    Ok(SimulatedData {
        answers: AnswerMatrix::from_flat(pb.question_labels().to_vec(), flat)?,
        causes,
        cause_labels: pb.cause_labels().to_vec(),
        demographics: demos,
    })
}
