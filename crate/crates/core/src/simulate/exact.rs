//! Exhaustive joint distribution of answers and causes for tiny instances.
//!
//! Block probabilities are orthant probabilities of the latent Gaussian. With
//! a diagonal correlation they factor into products of `q` and `1 - q`; with
//! correlated blocks of up to three questions they are evaluated by nested
//! adaptive Gauss-Legendre quadrature.

use std::collections::HashMap;
use std::sync::OnceLock;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Answer, AnswerMatrix, BlockPartition, Prior, Probbase};

use super::normal::{normal_cdf, normal_pdf, normal_quantile};
use super::CovarianceModel;

/// Largest `r * 3^s` accepted for enumeration.
pub const MAX_STATES: f64 = 1e6;

const GL_POINTS: usize = 20;
const LOWER_LIMIT: f64 = -12.0;
const QUAD_TOL: f64 = 1e-14;

fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_POINTS;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for m in 2..=n {
                    let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        (nodes, weights)
    })
}

fn gl(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gauss_legendre();
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    half * nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (left, right) = (gl(f, a, m), gl(f, m, b));
    if depth == 0 || (left + right - whole).abs() <= QUAD_TOL {
        return left + right;
    }
    adaptive(f, a, m, left, depth - 1) + adaptive(f, m, b, right, depth - 1)
}

/// `integral_{-inf}^{upper} f`, with the lower tail truncated where `phi` is negligible.
fn integrate_lower(f: &dyn Fn(f64) -> f64, upper: f64) -> f64 {
    let upper = upper.min(-LOWER_LIMIT);
    if upper <= LOWER_LIMIT {
        return 0.0;
    }
    let panels = (upper - LOWER_LIMIT).ceil() as usize;
    let width = (upper - LOWER_LIMIT) / panels as f64;
    (0..panels)
        .map(|p| {
            let (a, b) = (
                LOWER_LIMIT + p as f64 * width,
                LOWER_LIMIT + (p + 1) as f64 * width,
            );
            adaptive(f, a, b, gl(f, a, b), 30)
        })
        .sum()
}

/// `P(X <= h, Y <= k)` for standard bivariate normal with correlation `rho`.
pub fn bivariate_normal_cdf(h: f64, k: f64, rho: f64) -> f64 {
    if h <= LOWER_LIMIT || k <= LOWER_LIMIT {
        return 0.0;
    }
    if rho >= 1.0 - 1e-14 {
        return normal_cdf(h.min(k));
    }
    if rho <= -1.0 + 1e-14 {
        return (normal_cdf(h) - normal_cdf(-k)).max(0.0);
    }
    if rho == 0.0 {
        return normal_cdf(h) * normal_cdf(k);
    }
    let s = (1.0 - rho * rho).sqrt();
    let f = |x: f64| normal_pdf(x) * normal_cdf((k - rho * x) / s);
    integrate_lower(&f, h).clamp(0.0, 1.0)
}

/// `P(Z <= u)` for a standard normal vector of dimension at most 3 with
/// correlation matrix `corr` (row-major).
pub fn orthant_probability(u: &[f64], corr: &[f64]) -> Result<f64> {
    let d = u.len();
    match d {
        0 => Ok(1.0),
        1 => Ok(normal_cdf(u[0])),
        2 => Ok(bivariate_normal_cdf(u[0], u[1], corr[1])),
        3 => {
            if u.iter().any(|&x| x <= LOWER_LIMIT) {
                return Ok(0.0);
            }
            let (r12, r13, r23) = (corr[1], corr[2], corr[5]);
            let s2 = (1.0 - r12 * r12).sqrt();
            let s3 = (1.0 - r13 * r13).sqrt();
            if s2 < 1e-12 || s3 < 1e-12 {
                return Err(Error::Parameter(
                    "degenerate 3x3 correlation in orthant integral".into(),
                ));
            }
            let rho = ((r23 - r12 * r13) / (s2 * s3)).clamp(-1.0, 1.0);
            let f = |x: f64| {
                normal_pdf(x)
                    * bivariate_normal_cdf((u[1] - r12 * x) / s2, (u[2] - r13 * x) / s3, rho)
            };
            Ok(integrate_lower(&f, u[0]).clamp(0.0, 1.0))
        }
        _ => Err(Error::Parameter(format!(
            "orthant integration supports at most 3 dimensions, got {d}"
        ))),
    }
}

/// Enumerated joint law `P(A = alpha, D = d_j)`.
#[derive(Clone, Debug)]
pub struct ExactDistribution {
    /// One row per answer pattern with positive probability.
    pub patterns: AnswerMatrix,
    /// `joint[p * r + j]`.
    pub joint: Vec<f64>,
    /// `P(A = alpha)` per pattern.
    pub marginal: Vec<f64>,
    pub n_causes: usize,
}

impl ExactDistribution {
    pub fn n_patterns(&self) -> usize {
        self.marginal.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.marginal.iter().sum()
    }

    /// `P(A_k = Yes | D = d_j)` recovered from the table.
    pub fn yes_given_cause(&self, j: usize, k: usize) -> f64 {
        let r = self.n_causes;
        let (mut yes, mut all) = (0.0, 0.0);
        for p in 0..self.n_patterns() {
            let w = self.joint[p * r + j];
            all += w;
            if self.patterns.get(p, k).is_yes() {
                yes += w;
            }
        }
        yes / all
    }

    /// Draws `n` iid interviews from the marginal law.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<AnswerMatrix> {
        let mut cdf = Vec::with_capacity(self.n_patterns());
        let mut acc = 0.0;
        for &p in &self.marginal {
            acc += p;
            cdf.push(acc);
        }
        let idx: Vec<usize> = (0..n)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
            })
            .collect();
        self.patterns.select_rows(&idx)
    }
}

/// Block probability of the observed cells of one block, per cause.
struct BlockLaw<'a> {
    pb: &'a Probbase<f64>,
    cov: &'a CovarianceModel,
    part: &'a BlockPartition,
    cache: HashMap<(usize, usize, Vec<Answer>), f64>,
}

impl BlockLaw<'_> {
    fn prob(&mut self, j: usize, l: usize, cells: &[Answer]) -> Result<f64> {
        let key = (j, l, cells.to_vec());
        if let Some(&p) = self.cache.get(&key) {
            return Ok(p);
        }
        let block = &self.part.blocks()[l];
        let corr = self.cov.matrix(j, l);
        let m = block.len();
        let observed: Vec<usize> = (0..m).filter(|&a| cells[a].is_observed()).collect();
        let independent = observed
            .iter()
            .all(|&a| observed.iter().all(|&b| a == b || corr[a * m + b] == 0.0));
        let p = if independent {
            observed
                .iter()
                .map(|&a| {
                    let q = self.pb.get(j, block[a]);
                    if cells[a].is_yes() {
                        q
                    } else {
                        1.0 - q
                    }
                })
                .product()
        } else {
            let sign = |a: usize| if cells[a].is_yes() { 1.0 } else { -1.0 };
            let mut u = Vec::with_capacity(observed.len());
            for &a in &observed {
                let q = self.pb.get(j, block[a]);
                if q <= 0.0 || q >= 1.0 {
                    return Err(Error::Parameter(
                        "exact enumeration with correlated blocks needs q in (0, 1)".into(),
                    ));
                }
                u.push(sign(a) * normal_quantile(q)?);
            }
            let d = observed.len();
            let mut sub = vec![0.0; d * d];
            for (x, &a) in observed.iter().enumerate() {
                for (y, &b) in observed.iter().enumerate() {
                    sub[x * d + y] = sign(a) * sign(b) * corr[a * m + b];
                }
            }
            orthant_probability(&u, &sub)?
        };
        self.cache.insert(key, p);
        Ok(p)
    }
}

/// Enumerates every answer pattern with its joint probability per cause.
///
/// `missing_rate` thins each cell to missing independently (MCAR). With a
/// zero rate only `{0, 1}^s` patterns are listed.
pub fn exact_tiny_distribution(
    pb: &Probbase<f64>,
    prior: &Prior<f64>,
    part: &BlockPartition,
    cov: &CovarianceModel,
    missing_rate: f64,
) -> Result<ExactDistribution> {
    let (r, s) = (pb.n_causes(), pb.n_questions());
    let states = r as f64 * 3f64.powi(s as i32);
    if states > MAX_STATES {
        return Err(Error::TooLarge(states));
    }
    if prior.len() != r || part.n_questions() != s {
        return Err(Error::Dimension {
            what: "exact distribution inputs",
            expected: r,
            found: prior.len(),
        });
    }
    if !(0.0..1.0).contains(&missing_rate) {
        return Err(Error::Parameter(format!(
            "missing rate {missing_rate} outside [0, 1)"
        )));
    }
    cov.check_shape(r, part)?;
    let alphabet: &[Answer] = if missing_rate > 0.0 {
        &[Answer::No, Answer::Yes, Answer::Missing]
    } else {
        &[Answer::No, Answer::Yes]
    };
    let base = alphabet.len();
    let total = base.pow(s as u32);

    let mut law = BlockLaw {
        pb,
        cov,
        part,
        cache: HashMap::new(),
    };
    let mut patterns = Vec::new();
    let mut joint = Vec::new();
    let mut marginal = Vec::new();
    let mut row = vec![Answer::No; s];
    for code in 0..total {
        let mut c = code;
        for cell in row.iter_mut().rev() {
            *cell = alphabet[c % base];
            c /= base;
        }
        let n_missing = row.iter().filter(|a| !a.is_observed()).count();
        let thin =
            missing_rate.powi(n_missing as i32) * (1.0 - missing_rate).powi((s - n_missing) as i32);
        let mut per_cause = Vec::with_capacity(r);
        for j in 0..r {
            let mut p = prior.probs()[j] * thin;
            for (l, block) in part.blocks().iter().enumerate() {
                if p == 0.0 {
                    break;
                }
                let cells: Vec<Answer> = block.iter().map(|&k| row[k]).collect();
                p *= law.prob(j, l, &cells)?;
            }
            per_cause.push(p);
        }
        let m: f64 = per_cause.iter().sum();
        if m > 0.0 {
            patterns.extend_from_slice(&row);
            joint.extend(per_cause);
            marginal.push(m);
        }
    }
    let patterns = AnswerMatrix::from_flat(pb.question_labels().to_vec(), patterns)?;
    Ok(ExactDistribution {
        patterns,
        joint,
        marginal,
        n_causes: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let f = |x: f64| x.powi(10) - 3.0 * x.powi(3) + 1.0;
        let exact = 2.0 / 11.0 + 2.0;
        assert!((gl(&f, -1.0, 1.0) - exact).abs() < 1e-14);
    }

    #[test]
    fn bivariate_orthant_closed_form() {
        for &rho in &[-0.9, -0.5, -0.1, 0.2, 0.6, 0.95] {
            let want = 0.25 + f64::asin(rho) / (2.0 * PI);
            let got = bivariate_normal_cdf(0.0, 0.0, rho);
            assert!((got - want).abs() < 1e-12, "rho={rho}: {got} vs {want}");
        }
    }

    #[test]
    fn trivariate_orthant_closed_form() {
        let (a, b, c) = (0.3, -0.2, 0.5);
        let corr = [1.0, a, b, a, 1.0, c, b, c, 1.0];
        let want = 0.125 + (f64::asin(a) + f64::asin(b) + f64::asin(c)) / (4.0 * PI);
        let got = orthant_probability(&[0.0, 0.0, 0.0], &corr).unwrap();
        assert!((got - want).abs() < 1e-11, "{got} vs {want}");
    }

    #[test]
    fn bivariate_margins() {
        let (h, k, rho) = (0.7, -0.4, 0.45);
        // P(X<=h) = P(X<=h, Y<=k) + P(X<=h, Y>k), the latter by sign flip of Y.
        let total = bivariate_normal_cdf(h, k, rho) + bivariate_normal_cdf(h, -k, -rho);
        assert!((total - normal_cdf(h)).abs() < 1e-12);
    }

    fn tiny(r: usize, s: usize, q: Vec<f64>) -> (Probbase<f64>, Prior<f64>, BlockPartition) {
        let pb = Probbase::unlabelled(r, s, q).unwrap();
        let prior = Prior::unlabelled(vec![1.0 / r as f64; r]).unwrap();
        (pb, prior, BlockPartition::singletons(s))
    }

    #[test]
    fn single_question() {
        let (pb, prior, part) = tiny(1, 1, vec![0.7]);
        let cov = CovarianceModel::diagonal(1, &part);
        let d = exact_tiny_distribution(&pb, &prior, &part, &cov, 0.0).unwrap();
        assert_eq!(d.n_patterns(), 2);
        assert_eq!(d.patterns.get(0, 0), Answer::No);
        assert!((d.marginal[0] - 0.3).abs() < 1e-15);
        assert!((d.marginal[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn independent_product_form() {
        let (pb, _, part) = tiny(2, 2, vec![0.8, 0.3, 0.1, 0.6]);
        let prior = Prior::unlabelled(vec![0.25, 0.75]).unwrap();
        let cov = CovarianceModel::diagonal(2, &part);
        let d = exact_tiny_distribution(&pb, &prior, &part, &cov, 0.0).unwrap();
        // Patterns in order 00, 01, 10, 11.
        let hand = |j: usize, a: bool, b: bool| {
            let q = pb.row(j);
            prior.probs()[j]
                * (if a { q[0] } else { 1.0 - q[0] })
                * (if b { q[1] } else { 1.0 - q[1] })
        };
        for (p, (a, b)) in [(false, false), (false, true), (true, false), (true, true)]
            .into_iter()
            .enumerate()
        {
            for j in 0..2 {
                assert!((d.joint[p * 2 + j] - hand(j, a, b)).abs() < 1e-15);
            }
        }
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlated_table_sums_to_one_and_keeps_marginals() {
        let pb = Probbase::unlabelled(2, 4, vec![0.7, 0.2, 0.5, 0.9, 0.3, 0.6, 0.15, 0.4]).unwrap();
        let prior = Prior::unlabelled(vec![0.4, 0.6]).unwrap();
        let part = BlockPartition::new(4, vec![vec![0, 1, 2], vec![3]]).unwrap();
        let cov = CovarianceModel::exchangeable(2, &part, 0.5).unwrap();
        for rate in [0.0, 0.2] {
            let d = exact_tiny_distribution(&pb, &prior, &part, &cov, rate).unwrap();
            assert!((d.total_mass() - 1.0).abs() < 1e-9, "{}", d.total_mass());
            for j in 0..2 {
                for k in 0..4 {
                    let want = pb.get(j, k) * (1.0 - rate);
                    assert!((d.yes_given_cause(j, k) - want).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn too_large_rejected() {
        let s = 14;
        let pb = Probbase::unlabelled(1, s, vec![0.5; s]).unwrap();
        let prior = Prior::unlabelled(vec![1.0]).unwrap();
        let part = BlockPartition::singletons(s);
        let cov = CovarianceModel::diagonal(1, &part);
        assert!(matches!(
            exact_tiny_distribution(&pb, &prior, &part, &cov, 0.0),
            Err(Error::TooLarge(_))
        ));
    }
}
