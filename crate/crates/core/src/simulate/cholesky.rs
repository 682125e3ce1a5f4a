//! Cholesky factorization with ridge repair for near-singular correlation matrices.

use crate::error::{Error, Result};

/// Lower-triangular `L` with `L L^T = A + ridge * I`.
#[derive(Clone, Debug, PartialEq)]
pub struct CholeskyFactor {
    pub dim: usize,
    /// Row-major `dim x dim`, zero above the diagonal.
    pub lower: Vec<f64>,
    /// Diagonal shift that was needed; zero if `A` factored as given.
    pub ridge: f64,
}

impl CholeskyFactor {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.dim + j]
    }

    /// `L * e`.
    pub fn apply(&self, e: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            out[i] = self.lower[i * n..i * n + i + 1]
                .iter()
                .zip(e)
                .map(|(l, x)| l * x)
                .sum();
        }
    }
}

const SYMMETRY_TOL: f64 = 1e-12;
const MAX_RIDGE_STEPS: u32 = 80;

fn try_factor(a: &[f64], n: usize, ridge: f64) -> Option<Vec<f64>> {
    let scale = (0..n)
        .map(|i| a[i * n + i].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            if i == j {
                s += ridge;
            }
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p];
            }
            if i == j {
                if !(s > 1e-14 * scale) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Factors a symmetric matrix, adding the smallest ridge `1e-10 * 2^i` that
/// makes it positive definite.
pub fn cholesky_psd(a: &[f64], n: usize) -> Result<CholeskyFactor> {
    if a.len() != n * n {
        return Err(Error::Dimension {
            what: "square matrix",
            expected: n * n,
            found: a.len(),
        });
    }
    for i in 0..n {
        for j in 0..i {
            let diff = (a[i * n + j] - a[j * n + i]).abs();
            if !(diff <= SYMMETRY_TOL) {
                return Err(Error::NotSymmetric {
                    row: i,
                    col: j,
                    diff,
                });
            }
        }
    }
    if let Some(lower) = try_factor(a, n, 0.0) {
        return Ok(CholeskyFactor {
            dim: n,
            lower,
            ridge: 0.0,
        });
    }
    let mut ridge = 1e-10;
    for _ in 0..MAX_RIDGE_STEPS {
        if let Some(lower) = try_factor(a, n, ridge) {
            log::debug!("cholesky: repaired with ridge {ridge:e}");
            return Ok(CholeskyFactor {
                dim: n,
                lower,
                ridge,
            });
        }
        ridge *= 2.0;
    }
    Err(Error::Parameter(
        "matrix could not be repaired to positive definite".into(),
    ))
}
