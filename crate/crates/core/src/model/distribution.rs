use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::probbase::default_labels;

fn sum_tolerance<T: Scalar>() -> f64 {
    (1e3 * T::epsilon().as_f64()).max(1e-9)
}

fn check_simplex<T: Scalar>(probs: &[T]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::Distribution("empty probability vector".into()));
    }
    for (j, &p) in probs.iter().enumerate() {
        if !(p >= T::zero()) || !p.is_finite() {
            return Err(Error::Distribution(format!("entry {j} is {p}")));
        }
    }
    let total: f64 = probs.iter().map(|p| p.as_f64()).sum();
    if (total - 1.0).abs() > sum_tolerance::<T>() {
        return Err(Error::Distribution(format!(
            "entries sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// A point on the simplex over causes, e.g. a VA posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct CauseDistribution<T> {
    probs: Vec<T>,
}

impl<T: Scalar> CauseDistribution<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        check_simplex(&probs)?;
        Ok(Self { probs })
    }

    /// Caller guarantees the simplex invariant.
    pub(crate) fn new_unchecked(probs: Vec<T>) -> Self {
        debug_assert!(check_simplex(&probs).is_ok(), "{probs:?}");
        Self { probs }
    }

    pub fn point_mass(r: usize, j: usize) -> Self {
        let mut probs = vec![T::zero(); r];
        probs[j] = T::one();
        Self { probs }
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn into_vec(self) -> Vec<T> {
        self.probs
    }
}

/// Population cause-of-death fractions, labelled by cause.
#[derive(Clone, Debug, PartialEq)]
pub struct Prior<T> {
    probs: Vec<T>,
    cause_labels: Vec<String>,
}

impl<T: Scalar> Prior<T> {
    pub fn new(cause_labels: Vec<String>, probs: Vec<T>) -> Result<Self> {
        if cause_labels.len() != probs.len() {
            return Err(Error::Dimension {
                what: "prior labels",
                expected: probs.len(),
                found: cause_labels.len(),
            });
        }
        check_simplex(&probs)?;
        Ok(Self {
            probs,
            cause_labels,
        })
    }

    pub fn unlabelled(probs: Vec<T>) -> Result<Self> {
        Self::new(default_labels("c", probs.len()), probs)
    }

    pub fn uniform(cause_labels: Vec<String>) -> Result<Self> {
        let r = cause_labels.len();
        let p = T::one() / T::lit(r as f64);
        Self::new(cause_labels, vec![p; r])
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn cause_labels(&self) -> &[String] {
        &self.cause_labels
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn to_distribution(&self) -> CauseDistribution<T> {
        CauseDistribution {
            probs: self.probs.clone(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Prior<U> {
        Prior {
            probs: self.probs.iter().map(|p| U::lit(p.as_f64())).collect(),
            cause_labels: self.cause_labels.clone(),
        }
    }
}
