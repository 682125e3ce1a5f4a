//! Learning a block partition by agglomerative clustering of answer
//! correlations, and per-cause block correlation estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnswerMatrix, BlockPartition};
use crate::simulate::CovarianceModel;

/// Symmetric question-by-question correlation matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Association {
    labels: Vec<String>,
    values: Vec<f64>,
}

impl Association {
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let s = labels.len();
        if values.len() != s * s {
            return Err(Error::Dimension {
                what: "association matrix",
                expected: s * s,
                found: values.len(),
            });
        }
        for a in 0..s {
            for b in 0..a {
                let diff = (values[a * s + b] - values[b * s + a]).abs();
                if !(diff <= 1e-12) {
                    return Err(Error::NotSymmetric {
                        row: a,
                        col: b,
                        diff,
                    });
                }
            }
        }
        Ok(Self { labels, values })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.len() + b]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Columns as 0/1 codes with `u8::MAX` for missing.
fn columns(answers: &AnswerMatrix) -> Vec<Vec<u8>> {
    let (n, s) = (answers.n_rows(), answers.n_questions());
    (0..s)
        .map(|k| {
            (0..n)
                .map(|i| {
                    let a = answers.get(i, k);
                    if !a.is_observed() {
                        u8::MAX
                    } else {
                        a.is_yes() as u8
                    }
                })
                .collect()
        })
        .collect()
}

/// Pairwise-complete correlation over `rows`; `None` when undefined.
fn pair_correlation(x: &[u8], y: &[u8], rows: &[usize]) -> (Option<f64>, usize) {
    let (mut n, mut sx, mut sy, mut sxy) = (0usize, 0usize, 0usize, 0usize);
    for &i in rows {
        let (a, b) = (x[i], y[i]);
        if a != u8::MAX && b != u8::MAX {
            n += 1;
            sx += a as usize;
            sy += b as usize;
            sxy += (a & b) as usize;
        }
    }
    if n < 2 {
        return (None, n);
    }
    let nf = n as f64;
    let cov = sxy as f64 / nf - (sx as f64 / nf) * (sy as f64 / nf);
    let vx = sx as f64 / nf * (1.0 - sx as f64 / nf);
    let vy = sy as f64 / nf * (1.0 - sy as f64 / nf);
    if vx <= 0.0 || vy <= 0.0 {
        return (None, n);
    }
    (Some((cov / (vx * vy).sqrt()).clamp(-1.0, 1.0)), n)
}

fn correlation_matrix(cols: &[&Vec<u8>], rows: &[usize]) -> (Vec<f64>, usize) {
    let m = cols.len();
    let upper: Vec<(usize, usize, Option<f64>)> = (0..m)
        .into_par_iter()
        .flat_map_iter(|a| (a + 1..m).map(move |b| (a, b)))
        .map(|(a, b)| (a, b, pair_correlation(cols[a], cols[b], rows).0))
        .collect();
    let mut out = vec![0.0; m * m];
    let mut undefined = 0;
    for a in 0..m {
        out[a * m + a] = 1.0;
    }
    for (a, b, c) in upper {
        let v = c.unwrap_or_else(|| {
            undefined += 1;
            0.0
        });
        out[a * m + b] = v;
        out[b * m + a] = v;
    }
    (out, undefined)
}

/// Pairwise-complete correlation of the answer indicators.
pub fn pairwise_association(answers: &AnswerMatrix) -> Result<Association> {
    let cols = columns(answers);
    for (k, c) in cols.iter().enumerate() {
        let observed = c.iter().filter(|&&v| v != u8::MAX).count();
        if observed < 2 {
            return Err(Error::Parameter(format!(
                "question '{}' has {observed} observed answers; need at least 2",
                answers.question_labels()[k]
            )));
        }
    }
    let rows: Vec<usize> = (0..answers.n_rows()).collect();
    let refs: Vec<&Vec<u8>> = cols.iter().collect();
    let (values, undefined) = correlation_matrix(&refs, &rows);
    if undefined > 0 {
        log::warn!(
            "{undefined} question pairs lack overlap or variation; their association is set to 0"
        );
    }
    Association::new(answers.question_labels().to_vec(), values)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
    Complete,
}

impl std::str::FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(Self::Average),
            "complete" => Ok(Self::Complete),
            _ => Err(Error::Parameter(format!("unknown linkage '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutTarget {
    /// Number of blocks.
    Blocks(usize),
    /// Merge while the linkage distance is at most this height.
    Height(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DendrogramCut {
    pub linkage: Linkage,
    pub target: CutTarget,
}

impl DendrogramCut {
    pub fn blocks(linkage: Linkage, b: usize) -> Self {
        Self {
            linkage,
            target: CutTarget::Blocks(b),
        }
    }

    pub fn height(linkage: Linkage, h: f64) -> Self {
        Self {
            linkage,
            target: CutTarget::Height(h),
        }
    }
}

/// Agglomerative clustering on `1 - |assoc|`, cut at `cut`.
///
/// Ties in linkage distance go to the pair of clusters with the lowest
/// smallest question indices.
pub fn learn_partition(assoc: &Association, cut: &DendrogramCut) -> Result<BlockPartition> {
    let s = assoc.len();
    match cut.target {
        CutTarget::Blocks(b) if b == 0 || b > s => {
            return Err(Error::Parameter(format!(
                "block count {b} outside [1, {s}]"
            )));
        }
        CutTarget::Height(h) if !(h >= 0.0 && h.is_finite()) => {
            return Err(Error::Parameter(format!(
                "cut height {h} must be finite and >= 0"
            )));
        }
        _ => {}
    }
    // Clusters are kept sorted by their smallest member, which is also
    // their identity for tie-breaking.
    let mut clusters: Vec<Vec<usize>> = (0..s).map(|k| vec![k]).collect();
    let mut dist: Vec<Vec<f64>> = (0..s)
        .map(|a| (0..s).map(|b| 1.0 - assoc.get(a, b).abs()).collect())
        .collect();
    loop {
        let n = clusters.len();
        if let CutTarget::Blocks(b) = cut.target {
            if n <= b {
                break;
            }
        }
        if n == 1 {
            break;
        }
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..n {
            for c in a + 1..n {
                if dist[a][c] < best.0 {
                    best = (dist[a][c], a, c);
                }
            }
        }
        let (d, a, c) = best;
        if let CutTarget::Height(h) = cut.target {
            if d > h {
                break;
            }
        }
        let (na, nc) = (clusters[a].len() as f64, clusters[c].len() as f64);
        for x in 0..n {
            if x == a || x == c {
                continue;
            }
            let merged = match cut.linkage {
                Linkage::Average => (na * dist[a][x] + nc * dist[c][x]) / (na + nc),
                Linkage::Complete => dist[a][x].max(dist[c][x]),
            };
            dist[a][x] = merged;
            dist[x][a] = merged;
        }
        let moved = clusters.remove(c);
        clusters[a].extend(moved);
        clusters[a].sort_unstable();
        dist.remove(c);
        for row in dist.iter_mut() {
            row.remove(c);
        }
    }
    let mut assign = vec![0; s];
    for (l, members) in clusters.iter().enumerate() {
        for &k in members {
            assign[k] = l;
        }
    }
    BlockPartition::from_assignment(&assign)
}

/// Per-(cause, block) answer correlations, plus which pairs fell back to the pool.
#[derive(Clone, Debug)]
pub struct BlockCovariances {
    pub model: CovarianceModel,
    /// `(cause, block)` pairs estimated from all rows for lack of data.
    pub pooled: Vec<(usize, usize)>,
}

/// Sample correlations of the answer indicators within each block, per cause.
///
/// Causes with fewer than `|B_l| + 1` rows use the matrix pooled over all rows.
pub fn estimate_block_covariances(
    answers: &AnswerMatrix,
    causes: &[usize],
    n_causes: usize,
    part: &BlockPartition,
) -> Result<BlockCovariances> {
    if causes.len() != answers.n_rows() {
        return Err(Error::Dimension {
            what: "cause labels",
            expected: answers.n_rows(),
            found: causes.len(),
        });
    }
    if part.n_questions() != answers.n_questions() {
        return Err(Error::Dimension {
            what: "partition questions",
            expected: answers.n_questions(),
            found: part.n_questions(),
        });
    }
    if answers.n_rows() == 0 {
        return Err(Error::Parameter(
            "no rows to estimate block correlations from".into(),
        ));
    }
    if let Some(&j) = causes.iter().find(|&&j| j >= n_causes) {
        return Err(Error::Index {
            what: "cause label",
            index: j,
            len: n_causes,
        });
    }
    let cols = columns(answers);
    let all: Vec<usize> = (0..answers.n_rows()).collect();
    let mut by_cause = vec![Vec::new(); n_causes];
    for (i, &j) in causes.iter().enumerate() {
        by_cause[j].push(i);
    }
    let pooled_mats: Vec<Vec<f64>> = part
        .blocks()
        .iter()
        .map(|b| correlation_matrix(&b.iter().map(|&k| &cols[k]).collect::<Vec<_>>(), &all).0)
        .collect();
    let mut mats = Vec::with_capacity(n_causes * part.n_blocks());
    let mut pooled = Vec::new();
    for (j, rows) in by_cause.iter().enumerate() {
        for (l, block) in part.blocks().iter().enumerate() {
            if rows.len() < block.len() + 1 {
                pooled.push((j, l));
                mats.push(pooled_mats[l].clone());
            } else {
                let refs: Vec<&Vec<u8>> = block.iter().map(|&k| &cols[k]).collect();
                mats.push(correlation_matrix(&refs, rows).0);
            }
        }
    }
    if !pooled.is_empty() {
        log::info!(
            "{} (cause, block) pairs use pooled correlations",
            pooled.len()
        );
    }
    Ok(BlockCovariances {
        model: CovarianceModel::from_matrices(n_causes, part, mats)?,
        pooled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Answer;

    fn labels(s: usize) -> Vec<String> {
        (0..s).map(|k| format!("q{k}")).collect()
    }

    #[test]
    fn duplicate_and_complement_columns() {
        use Answer::*;
        let a = [Yes, No, Yes, Yes, No, No];
        let rows = a
            .iter()
            .map(|&x| vec![x, x, if x == Yes { No } else { Yes }])
            .collect();
        let m = AnswerMatrix::new(labels(3), rows).unwrap();
        let assoc = pairwise_association(&m).unwrap();
        assert!((assoc.get(0, 1) - 1.0).abs() < 1e-15);
        assert!((assoc.get(0, 2) + 1.0).abs() < 1e-15);
        assert_eq!(assoc.get(2, 2), 1.0);
    }

    #[test]
    fn too_few_observations() {
        use Answer::*;
        let m = AnswerMatrix::new(
            labels(2),
            vec![vec![Yes, Missing], vec![No, Missing], vec![Yes, Yes]],
        )
        .unwrap();
        assert!(pairwise_association(&m).is_err());
    }

    fn planted(within: f64) -> Association {
        let s = 8;
        let group = |k: usize| (k * 7 % 8) % 2;
        let mut v = vec![0.0; s * s];
        for a in 0..s {
            for b in 0..s {
                v[a * s + b] = if a == b {
                    1.0
                } else if group(a) == group(b) {
                    within
                } else {
                    0.0
                };
            }
        }
        Association::new(labels(s), v).unwrap()
    }

    #[test]
    fn extreme_cuts() {
        let assoc = planted(0.6);
        let p = learn_partition(&assoc, &DendrogramCut::blocks(Linkage::Average, 8)).unwrap();
        assert_eq!(p.n_blocks(), 8);
        let p = learn_partition(&assoc, &DendrogramCut::blocks(Linkage::Complete, 1)).unwrap();
        assert_eq!(p.blocks(), &[(0..8).collect::<Vec<_>>()]);
        assert!(learn_partition(&assoc, &DendrogramCut::blocks(Linkage::Average, 0)).is_err());
        assert!(learn_partition(&assoc, &DendrogramCut::blocks(Linkage::Average, 9)).is_err());
        assert!(learn_partition(&assoc, &DendrogramCut::height(Linkage::Average, -1.0)).is_err());
    }

    #[test]
    fn planted_groups_recovered() {
        let assoc = planted(-0.6);
        for linkage in [Linkage::Average, Linkage::Complete] {
            let p = learn_partition(&assoc, &DendrogramCut::blocks(linkage, 2)).unwrap();
            assert_eq!(p.canonical(), vec![vec![0, 2, 4, 6], vec![1, 3, 5, 7]]);
            let h = learn_partition(&assoc, &DendrogramCut::height(linkage, 0.5)).unwrap();
            assert_eq!(h.canonical(), p.canonical());
        }
    }

    #[test]
    fn ties_break_by_lowest_index() {
        // All distances equal: merges proceed (0,1), then ({0,1},2), ...
        let s = 4;
        let mut v = vec![0.5; s * s];
        for a in 0..s {
            v[a * s + a] = 1.0;
        }
        let assoc = Association::new(labels(s), v).unwrap();
        let p = learn_partition(&assoc, &DendrogramCut::blocks(Linkage::Average, 3)).unwrap();
        assert_eq!(p.canonical(), vec![vec![0, 1], vec![2], vec![3]]);
    }

    #[test]
    fn pooled_fallback_for_sparse_cause() {
        use Answer::*;
        let rows = vec![
            vec![Yes, Yes, No],
            vec![No, No, Yes],
            vec![Yes, No, No],
            vec![No, Yes, Yes],
            vec![Yes, Yes, Yes],
        ];
        let m = AnswerMatrix::new(labels(3), rows).unwrap();
        let part = BlockPartition::new(3, vec![vec![0, 1], vec![2]]).unwrap();
        let est = estimate_block_covariances(&m, &[0, 0, 0, 0, 1], 2, &part).unwrap();
        assert_eq!(est.pooled, vec![(1, 0), (1, 1)]);
        let single = estimate_block_covariances(&m, &[0; 5], 1, &part).unwrap();
        assert!(single.pooled.is_empty());
        let assoc = pairwise_association(&m).unwrap();
        assert!((single.model.matrix(0, 0)[1] - assoc.get(0, 1)).abs() < 1e-15);
    }
}
