//! Rank-based evaluation: ROC AUC with Hanley-McNeil error, ROC curves, and
//! the Wilcoxon rank-sum test.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::simulate::log_normal_cdf;

/// Midranks (1-based) of `values`, averaging over ties.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let rank = 0.5 * ((start + 1) + end) as f64;
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn tie_sizes(values: &[f64]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut start = 0;
    while start < v.len() {
        let mut end = start + 1;
        while end < v.len() && v[end] == v[start] {
            end += 1;
        }
        if end - start > 1 {
            out.push(end - start);
        }
        start = end;
    }
    out
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RocAuc {
    pub auc: f64,
    pub se: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Mann-Whitney U of `pos` over `neg`: pairs with `pos > neg`, ties counting half.
fn mann_whitney_u(pos: &[f64], neg: &[f64]) -> f64 {
    let mut all = Vec::with_capacity(pos.len() + neg.len());
    all.extend_from_slice(pos);
    all.extend_from_slice(neg);
    let ranks = midranks(&all);
    let n1 = pos.len() as f64;
    let rank_sum: f64 = ranks[..pos.len()].iter().sum();
    rank_sum - n1 * (n1 + 1.0) / 2.0
}

/// AUC of `scores` for predicting `labels` (true = positive class).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocAuc> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            what: "roc labels",
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Stats(format!("non-finite score at position {i}")));
    }
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(&s, _)| s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| !l)
        .map(|(&s, _)| s)
        .collect();
    roc_auc_split(&pos, &neg)
}

/// AUC with the positive and negative samples given separately.
pub fn roc_auc_split(pos: &[f64], neg: &[f64]) -> Result<RocAuc> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Stats("ROC needs both classes present".into()));
    }
    let (n1, n2) = (pos.len() as f64, neg.len() as f64);
    let auc = mann_whitney_u(pos, neg) / (n1 * n2);
    let q1 = auc / (2.0 - auc);
    let q2 = 2.0 * auc * auc / (1.0 + auc);
    let var = (auc * (1.0 - auc) + (n1 - 1.0) * (q1 - auc * auc) + (n2 - 1.0) * (q2 - auc * auc))
        / (n1 * n2);
    Ok(RocAuc {
        auc,
        se: var.max(0.0).sqrt(),
        n_pos: pos.len(),
        n_neg: neg.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve, one point per distinct score plus the `(0, 0)` origin.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            what: "roc labels",
            expected: scores.len(),
            found: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Stats("ROC needs both classes present".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut p = 0;
    while p < idx.len() {
        let t = scores[idx[p]];
        while p < idx.len() && scores[idx[p]] == t {
            if labels[idx[p]] {
                tp += 1;
            } else {
                fp += 1;
            }
            p += 1;
        }
        points.push(RocPoint {
            threshold: t,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    Ok(points)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WilcoxonTest {
    /// U statistic of `x` over `y`.
    pub u: f64,
    pub z: f64,
    pub p_value: f64,
    /// Natural log of the p-value, finite below the `f64` range.
    pub log_p: f64,
}

/// Two-sided rank-sum test, normal approximation with tie and continuity corrections.
pub fn wilcoxon_rank_sum(x: &[f64], y: &[f64]) -> Result<WilcoxonTest> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Stats(
            "rank-sum test needs two nonempty samples".into(),
        ));
    }
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let u = mann_whitney_u(x, y);
    let mean = n1 * n2 / 2.0;
    let mut all = x.to_vec();
    all.extend_from_slice(y);
    let n = n1 + n2;
    let ties: f64 = tie_sizes(&all)
        .iter()
        .map(|&t| (t as f64).powi(3) - t as f64)
        .sum();
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    let diff = u - mean;
    if !(var > 0.0) || diff.abs() <= 0.5 {
        return Ok(WilcoxonTest {
            u,
            z: 0.0,
            p_value: 1.0,
            log_p: 0.0,
        });
    }
    let z = (diff - 0.5 * diff.signum()) / var.sqrt();
    let log_p = (std::f64::consts::LN_2 + log_normal_cdf(-z.abs())).min(0.0);
    Ok(WilcoxonTest {
        u,
        z,
        p_value: log_p.exp(),
        log_p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &a) in scores.iter().enumerate() {
            for (j, &b) in scores.iter().enumerate() {
                if labels[i] && !labels[j] {
                    den += 1.0;
                    num += if a > b {
                        1.0
                    } else if a == b {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / den
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn perfect_separation() {
        let r = roc_auc(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.se, 0.0);
    }

    #[test]
    fn single_class_is_error() {
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn hanley_mcneil_reference() {
        // A = 0.75 with 30 positives and 50 negatives.
        let a: f64 = 0.75;
        let (q1, q2) = (a / (2.0 - a), 2.0 * a * a / (1.0 + a));
        let want = ((a * (1.0 - a) + 29.0 * (q1 - a * a) + 49.0 * (q2 - a * a)) / 1500.0).sqrt();
        // Half the negatives tie with the positives, the rest fall below.
        let pos = vec![1.0; 30];
        let mut neg = vec![0.0; 50];
        neg[..25].fill(1.0);
        let r = roc_auc_split(&pos, &neg).unwrap();
        assert!((r.auc - 0.75).abs() < 1e-15);
        assert!((r.se - want).abs() < 1e-15);
    }

    #[test]
    fn null_auc_near_half() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let scores: Vec<f64> = (0..4000).map(|_| rng.random()).collect();
        let labels: Vec<bool> = (0..4000).map(|_| rng.random()).collect();
        let r = roc_auc(&scores, &labels).unwrap();
        assert!((r.auc - 0.5).abs() < 3.0 * r.se, "{r:?}");
    }

    #[test]
    fn curve_ends_at_one() {
        let pts = roc_curve(&[0.3, 0.3, 0.9, 0.1], &[true, false, true, false]).unwrap();
        assert_eq!(pts.first().unwrap().fpr, 0.0);
        let last = pts.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert_eq!(pts.len(), 4);
    }

    #[test]
    fn identical_samples_give_p_one() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let t = wilcoxon_rank_sum(&x, &x).unwrap();
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn separated_samples_tiny_p() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..50).map(|i| 100.0 + i as f64).collect();
        let t = wilcoxon_rank_sum(&x, &y).unwrap();
        assert_eq!(t.u, 0.0);
        // Hand formula: z = (0 - 1250 + 0.5) / sqrt(50*50*101/12).
        let z = (0.5 - 1250.0) / (2500.0f64 * 101.0 / 12.0).sqrt();
        assert!((t.z - z).abs() < 1e-12);
        assert!(t.p_value < 1e-15);
        assert!((t.log_p - (2.0 * crate::simulate::normal_cdf(z)).ln()).abs() < 1e-9);
    }

    #[test]
    fn log_p_below_double_range() {
        let x: Vec<f64> = (0..3000).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..3000).map(|i| 1e4 + i as f64).collect();
        let t = wilcoxon_rank_sum(&x, &y).unwrap();
        assert!(t.log_p.is_finite() && t.log_p < -700.0, "{}", t.log_p);
    }

    #[test]
    fn empty_is_error() {
        assert!(wilcoxon_rank_sum(&[], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn auc_matches_pair_counting(data in prop::collection::vec((0u8..6, any::<bool>()), 2..200)) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64).collect();
            let labels: Vec<bool> = data.iter().map(|(_, l)| *l).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let r = roc_auc(&scores, &labels).unwrap();
            prop_assert_eq!(r.auc, brute_auc(&scores, &labels));
        }
    }
}
