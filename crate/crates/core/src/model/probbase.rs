use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default clamp applied to probbase entries on load.
pub const DEFAULT_CLAMP: f64 = 1e-6;

/// `r x s` matrix of `P(answer k is Yes | cause j)`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Probbase<T> {
    values: Vec<T>,
    cause_labels: Vec<String>,
    question_labels: Vec<String>,
}

impl<T: Scalar> Probbase<T> {
    /// `values` is row-major with one row per cause.
    pub fn new(
        cause_labels: Vec<String>,
        question_labels: Vec<String>,
        values: Vec<T>,
    ) -> Result<Self> {
        let (r, s) = (cause_labels.len(), question_labels.len());
        if r == 0 {
            return Err(Error::Dimension {
                what: "probbase rows",
                expected: 1,
                found: 0,
            });
        }
        if s == 0 {
            return Err(Error::Dimension {
                what: "probbase columns",
                expected: 1,
                found: 0,
            });
        }
        if values.len() != r * s {
            return Err(Error::Dimension {
                what: "probbase cells",
                expected: r * s,
                found: values.len(),
            });
        }
        for (idx, &v) in values.iter().enumerate() {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::Probability {
                    what: "probbase",
                    row: idx / s,
                    col: idx % s,
                    value: v.as_f64(),
                });
            }
        }
        Ok(Self {
            values,
            cause_labels,
            question_labels,
        })
    }

    pub fn from_rows(
        cause_labels: Vec<String>,
        question_labels: Vec<String>,
        rows: &[Vec<T>],
    ) -> Result<Self> {
        let s = question_labels.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != s) {
            return Err(Error::Dimension {
                what: "probbase row length",
                expected: s,
                found: bad.len(),
            });
        }
        Self::new(cause_labels, question_labels, rows.concat())
    }

    /// Unlabelled constructor naming causes `c1..` and questions `q1..`.
    pub fn unlabelled(r: usize, s: usize, values: Vec<T>) -> Result<Self> {
        Self::new(default_labels("c", r), default_labels("q", s), values)
    }

    #[inline]
    pub fn n_causes(&self) -> usize {
        self.cause_labels.len()
    }

    #[inline]
    pub fn n_questions(&self) -> usize {
        self.question_labels.len()
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> T {
        self.values[j * self.n_questions() + k]
    }

    /// Overwrites one entry; the value must lie in `[0, 1]`.
    pub fn set(&mut self, j: usize, k: usize, v: T) -> Result<()> {
        let (r, s) = (self.n_causes(), self.n_questions());
        if j >= r {
            return Err(Error::Index {
                what: "causes",
                index: j,
                len: r,
            });
        }
        if k >= s {
            return Err(Error::Index {
                what: "questions",
                index: k,
                len: s,
            });
        }
        if !(v >= T::zero() && v <= T::one()) {
            return Err(Error::Probability {
                what: "probbase",
                row: j,
                col: k,
                value: v.as_f64(),
            });
        }
        self.values[j * s + k] = v;
        Ok(())
    }

    pub fn with_entry(&self, j: usize, k: usize, v: T) -> Result<Self> {
        let mut out = self.clone();
        out.set(j, k, v)?;
        Ok(out)
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[T] {
        let s = self.n_questions();
        &self.values[j * s..(j + 1) * s]
    }

    pub fn column(&self, k: usize) -> impl ExactSizeIterator<Item = T> + '_ {
        let s = self.n_questions();
        (0..self.n_causes()).map(move |j| self.values[j * s + k])
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn cause_labels(&self) -> &[String] {
        &self.cause_labels
    }

    pub fn question_labels(&self) -> &[String] {
        &self.question_labels
    }

    /// Applies `f` to every entry, revalidating the range.
    pub fn map(&self, mut f: impl FnMut(usize, usize, T) -> T) -> Result<Self> {
        let s = self.n_questions();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i / s, i % s, v))
            .collect();
        Self::new(
            self.cause_labels.clone(),
            self.question_labels.clone(),
            values,
        )
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Probbase<U> {
        Probbase {
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
            cause_labels: self.cause_labels.clone(),
            question_labels: self.question_labels.clone(),
        }
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

pub(crate) fn default_labels(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Maps every entry into `[eps, 1 - eps]`.
pub fn clamp_probbase<T: Scalar>(pb: &Probbase<T>, eps: T) -> Probbase<T> {
    assert!(
        eps > T::zero() && eps < T::lit(0.5),
        "clamp must lie in (0, 0.5)"
    );
    let hi = T::one() - eps;
    Probbase {
        values: pb.values.iter().map(|&v| v.max(eps).min(hi)).collect(),
        cause_labels: pb.cause_labels.clone(),
        question_labels: pb.question_labels.clone(),
    }
}
