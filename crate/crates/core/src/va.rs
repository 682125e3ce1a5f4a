//! VA posterior algorithms and the mixture imputation `F_k`.
//!
//! Both shipped algorithms are log-linear in the answers: the log of the
//! unnormalized posterior weight of cause `j` is `ln pi_j` plus one term per
//! observed question. The scorer exploits this through
//! [`VaAlgorithm::additive_terms`] to compute every masked-block posterior of
//! a row from per-block partial sums.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Answer, CauseDistribution, Prior, Probbase};
use crate::scalar::{softmax_in_place, Scalar};

/// Per-(question, cause) log-weight contributions, stored question-major
/// (`index = k * r + j`). Missing answers contribute zero.
#[derive(Clone, Debug)]
pub struct AdditiveTerms<T> {
    pub n_causes: usize,
    pub yes: Vec<T>,
    pub no: Vec<T>,
}

impl<T: Scalar> AdditiveTerms<T> {
    #[inline]
    pub fn term(&self, k: usize, j: usize, a: Answer) -> T {
        match a {
            Answer::Yes => self.yes[k * self.n_causes + j],
            Answer::No => self.no[k * self.n_causes + j],
            Answer::Missing => T::zero(),
        }
    }
}

/// A VA algorithm `V(a, q) -> posterior over causes`.
///
/// Implementations may read every probbase column but must treat missing
/// answers as uninformative; the scorer passes rows whose held-out block is
/// set to [`Answer::Missing`].
pub trait VaAlgorithm<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    fn posterior(&self, row: &[Answer], pb: &Probbase<T>, prior: &Prior<T>)
        -> CauseDistribution<T>;

    /// Log-linear decomposition of the posterior, if the algorithm has one.
    fn additive_terms(&self, _pb: &Probbase<T>) -> Option<AdditiveTerms<T>> {
        None
    }
}

/// The two built-in algorithms, selectable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[serde(rename = "interva4")]
    InterVa4,
    NaiveBayes,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::InterVa4, Algorithm::NaiveBayes];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::InterVa4 => "interva4",
            Algorithm::NaiveBayes => "naive_bayes",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "interva4" => Ok(Algorithm::InterVa4),
            "naive_bayes" | "naive-bayes" => Ok(Algorithm::NaiveBayes),
            other => Err(Error::Parameter(format!(
                "unknown algorithm `{other}` (expected interva4 or naive_bayes)"
            ))),
        }
    }
}

impl<T: Scalar> VaAlgorithm<T> for Algorithm {
    fn name(&self) -> &str {
        self.as_str()
    }

    fn posterior(
        &self,
        row: &[Answer],
        pb: &Probbase<T>,
        prior: &Prior<T>,
    ) -> CauseDistribution<T> {
        match self {
            Algorithm::InterVa4 => interva4_posterior(row, pb, prior),
            Algorithm::NaiveBayes => naive_bayes_posterior(row, pb, prior),
        }
    }

    fn additive_terms(&self, pb: &Probbase<T>) -> Option<AdditiveTerms<T>> {
        let (r, s) = (pb.n_causes(), pb.n_questions());
        let mut yes = Vec::with_capacity(r * s);
        let mut no = Vec::with_capacity(r * s);
        for k in 0..s {
            for q in pb.column(k) {
                yes.push(q.ln());
                no.push(match self {
                    Algorithm::InterVa4 => T::zero(),
                    Algorithm::NaiveBayes => (T::one() - q).ln(),
                });
            }
        }
        Some(AdditiveTerms {
            n_causes: r,
            yes,
            no,
        })
    }
}

fn log_posterior<T: Scalar>(
    row: &[Answer],
    pb: &Probbase<T>,
    prior: &Prior<T>,
    use_no: bool,
) -> CauseDistribution<T> {
    let mut logits: Vec<T> = prior.probs().iter().map(|p| p.ln()).collect();
    for (j, logit) in logits.iter_mut().enumerate() {
        let q = pb.row(j);
        for (k, &a) in row.iter().enumerate() {
            match a {
                Answer::Yes => *logit = *logit + q[k].ln(),
                Answer::No if use_no => *logit = *logit + (T::one() - q[k]).ln(),
                _ => {}
            }
        }
    }
    softmax_in_place(&mut logits);
    CauseDistribution::new_unchecked(logits)
}

/// InterVA4 score: `pi_j * prod_{k: a_k = Yes} q_jk`, normalized over causes.
///
/// `No` and missing answers are ignored; a row with no `Yes` returns the prior.
pub fn interva4_posterior<T: Scalar>(
    row: &[Answer],
    pb: &Probbase<T>,
    prior: &Prior<T>,
) -> CauseDistribution<T> {
    if !row.iter().any(|a| a.is_yes()) {
        return prior.to_distribution();
    }
    log_posterior(row, pb, prior, false)
}

/// Naive-Bayes posterior over the observed (non-missing) answers.
pub fn naive_bayes_posterior<T: Scalar>(
    row: &[Answer],
    pb: &Probbase<T>,
    prior: &Prior<T>,
) -> CauseDistribution<T> {
    if !row.iter().any(|a| a.is_observed()) {
        return prior.to_distribution();
    }
    log_posterior(row, pb, prior, true)
}

/// `F_k(pi, q) = sum_j pi_j q_jk`: probability of a `Yes` to question `k`.
pub fn impute_question_prob<T: Scalar>(
    pi: &CauseDistribution<T>,
    pb: &Probbase<T>,
    k: usize,
) -> Result<T> {
    if k >= pb.n_questions() {
        return Err(Error::Index {
            what: "questions",
            index: k,
            len: pb.n_questions(),
        });
    }
    if pi.len() != pb.n_causes() {
        return Err(Error::Dimension {
            what: "distribution length",
            expected: pb.n_causes(),
            found: pi.len(),
        });
    }
    Ok(pi
        .probs()
        .iter()
        .zip(pb.column(k))
        .map(|(&p, q)| p * q)
        .sum())
}
