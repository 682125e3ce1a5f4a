//! Perturbed probbases with a record of the applied direction per entry.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Sign;
use crate::error::{Error, Result};
use crate::model::Probbase;

pub const DEFAULT_SD: f64 = 0.05;
pub const DEFAULT_SPARSE_COUNT: usize = 20;
pub const DEFAULT_OFFSET: f64 = 0.2;
pub const DEFAULT_ELIGIBILITY: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationKind {
    /// Every entry replaced by an independent `U(0, 1)` draw.
    Chaotic,
    /// A uniformly random permutation of all entries.
    Shuffled,
    /// Independent `N(0, sd)` noise on every entry.
    GlobalGaussian { sd: f64 },
    /// `N(0, sd)` noise on `count` distinct random entries.
    SparseGaussian { count: usize, sd: f64 },
    /// Entries above `threshold` split at random into thirds moved by
    /// `+offset`, `-offset` and left alone. With `count` set, exactly
    /// `count` entries go each way instead.
    SignedOffset {
        offset: f64,
        threshold: f64,
        count: Option<usize>,
    },
}

impl PerturbationKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Chaotic => "chaotic",
            Self::Shuffled => "shuffled",
            Self::GlobalGaussian { .. } => "global_gaussian",
            Self::SparseGaussian { .. } => "sparse_gaussian",
            Self::SignedOffset { .. } => "signed_offset",
        }
    }

    pub fn global_gaussian() -> Self {
        Self::GlobalGaussian { sd: DEFAULT_SD }
    }

    pub fn sparse_gaussian() -> Self {
        Self::SparseGaussian {
            count: DEFAULT_SPARSE_COUNT,
            sd: DEFAULT_SD,
        }
    }

    pub fn signed_offset() -> Self {
        Self::SignedOffset {
            offset: DEFAULT_OFFSET,
            threshold: DEFAULT_ELIGIBILITY,
            count: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    #[serde(flatten)]
    pub kind: PerturbationKind,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn new(kind: PerturbationKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    /// Zero `sd` or `offset` is allowed and yields an unperturbed copy.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        match self.kind {
            PerturbationKind::GlobalGaussian { sd } if !(sd >= 0.0 && sd.is_finite()) => {
                bad(format!("sd {sd} must be >= 0"))
            }
            PerturbationKind::SparseGaussian { count, sd } => {
                if count == 0 {
                    bad("sparse perturbation needs count >= 1".into())
                } else if !(sd >= 0.0 && sd.is_finite()) {
                    bad(format!("sd {sd} must be >= 0"))
                } else {
                    Ok(())
                }
            }
            PerturbationKind::SignedOffset {
                offset,
                threshold,
                count,
            } => {
                if !(0.0..1.0).contains(&offset) {
                    bad(format!("offset {offset} must lie in [0, 1)"))
                } else if !(threshold > 0.0 && threshold < 1.0) {
                    bad(format!(
                        "eligibility threshold {threshold} must lie in (0, 1)"
                    ))
                } else if count == Some(0) {
                    bad("signed offset count must be >= 1".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// A perturbed probbase and `y[j * s + k]`, the direction applied to each entry.
#[derive(Clone, Debug)]
pub struct Perturbation {
    pub probbase: Probbase<f64>,
    pub truth: Vec<Sign>,
}

fn sign_of_change(new: f64, old: f64) -> Sign {
    Sign::of(new - old, 0.0)
}

/// Applies `spec` to `pb`, clamping results into `[clamp, 1 - clamp]`.
pub fn perturb_probbase(
    pb: &Probbase<f64>,
    spec: &PerturbationSpec,
    clamp: f64,
) -> Result<Perturbation> {
    spec.validate()?;
    if !(0.0..0.5).contains(&clamp) {
        return Err(Error::Parameter(format!(
            "clamp {clamp} must lie in [0, 0.5)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let old = pb.values();
    let n = old.len();
    let fit = |v: f64| v.clamp(clamp, 1.0 - clamp);
    let mut new = old.to_vec();
    let mut truth = vec![Sign::Zero; n];
    match spec.kind {
        PerturbationKind::Chaotic => {
            for i in 0..n {
                new[i] = rng.random::<f64>();
                truth[i] = sign_of_change(fit(new[i]), old[i]);
            }
        }
        PerturbationKind::Shuffled => {
            new.shuffle(&mut rng);
            for i in 0..n {
                truth[i] = sign_of_change(fit(new[i]), old[i]);
            }
        }
        PerturbationKind::GlobalGaussian { sd } => {
            if sd > 0.0 {
                let noise = Normal::new(0.0, sd).map_err(|e| Error::Parameter(e.to_string()))?;
                for i in 0..n {
                    new[i] = old[i] + noise.sample(&mut rng);
                    truth[i] = sign_of_change(fit(new[i]), old[i]);
                }
            }
        }
        PerturbationKind::SparseGaussian { count, sd } => {
            if count > n {
                return Err(Error::NotEnoughEntries {
                    requested: count,
                    eligible: n,
                });
            }
            let picked = rand::seq::index::sample(&mut rng, n, count);
            if sd > 0.0 {
                let noise = Normal::new(0.0, sd).map_err(|e| Error::Parameter(e.to_string()))?;
                for i in picked.iter() {
                    new[i] = old[i] + noise.sample(&mut rng);
                    truth[i] = sign_of_change(fit(new[i]), old[i]);
                }
            }
        }
        PerturbationKind::SignedOffset {
            offset,
            threshold,
            count,
        } => {
            let mut eligible: Vec<usize> = (0..n).filter(|&i| old[i] > threshold).collect();
            let per_side = match count {
                Some(c) => {
                    if 2 * c > eligible.len() {
                        return Err(Error::NotEnoughEntries {
                            requested: 2 * c,
                            eligible: eligible.len(),
                        });
                    }
                    c
                }
                None => {
                    if eligible.len() < 3 {
                        return Err(Error::NotEnoughEntries {
                            requested: 3,
                            eligible: eligible.len(),
                        });
                    }
                    eligible.len() / 3
                }
            };
            eligible.shuffle(&mut rng);
            for &i in &eligible[..per_side] {
                new[i] = old[i] + offset;
                truth[i] = Sign::Pos;
            }
            for &i in &eligible[per_side..2 * per_side] {
                new[i] = old[i] - offset;
                truth[i] = Sign::Neg;
            }
            if offset == 0.0 {
                truth.iter_mut().for_each(|t| *t = Sign::Zero);
            }
        }
    }
    let probbase = Probbase::new(
        pb.cause_labels().to_vec(),
        pb.question_labels().to_vec(),
        new.into_iter().map(fit).collect(),
    )?;
    Ok(Perturbation { probbase, truth })
}
