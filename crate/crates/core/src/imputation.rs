//! Held-out block imputation accuracy `I_A(q)` with cross-entropy loss.
//!
//! For every block, the block's answers are hidden, a posterior over causes
//! is computed from the remaining answers, and each hidden answer is
//! predicted by the posterior mixture of probbase entries. Lower is better.
//!
//! Rows are scored in parallel; per-row block losses are reduced in row
//! order so results are bit-identical for any thread count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{validate_inputs, Answer, AnswerMatrix, BlockPartition, Prior, Probbase};
use crate::scalar::{softmax_in_place, Scalar};
use crate::va::{AdditiveTerms, VaAlgorithm};

/// Which cells enter the average.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Denominator {
    /// Only answered cells are scored; divide by their count.
    #[default]
    Scored,
    /// Every cell is scored with missing treated as `No`; divide by `n * s`.
    #[serde(rename = "ns")]
    All,
}

impl fmt::Display for Denominator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Denominator::Scored => "scored",
            Denominator::All => "ns",
        })
    }
}

impl FromStr for Denominator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "scored" => Ok(Denominator::Scored),
            "ns" | "all" => Ok(Denominator::All),
            other => Err(Error::Parameter(format!(
                "unknown denominator `{other}` (expected scored or ns)"
            ))),
        }
    }
}

/// `-(y ln p + (1 - y) ln(1 - p))`.
#[inline]
pub fn cross_entropy<T: Scalar>(predicted: T, observed_yes: bool) -> T {
    if observed_yes {
        -predicted.ln()
    } else {
        -(T::one() - predicted).ln()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellRecord<T> {
    pub row: usize,
    pub question: usize,
    /// Imputed probability of `Yes`.
    pub imputed: T,
    pub observed: Answer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImputationResult<T> {
    /// The estimate `I_A(q)`.
    pub overall: T,
    /// Loss sum `I_l` of each block.
    pub per_block: Vec<T>,
    pub per_cell: Option<Vec<CellRecord<T>>>,
    pub scored_cells: usize,
    pub total_loss: T,
    pub denominator: Denominator,
}

/// Read-only inputs shared by every evaluation of the objective.
pub struct ScoringContext<'a, T: Scalar> {
    answers: &'a AnswerMatrix,
    prior: &'a Prior<T>,
    partition: &'a BlockPartition,
    algorithm: &'a dyn VaAlgorithm<T>,
    denominator: Denominator,
    weights: Option<&'a [T]>,
    keep_cells: bool,
}

impl<'a, T: Scalar> Clone for ScoringContext<'a, T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<'a, T: Scalar> Copy for ScoringContext<'a, T> {}

impl<'a, T: Scalar> ScoringContext<'a, T> {
    pub fn new(
        answers: &'a AnswerMatrix,
        prior: &'a Prior<T>,
        partition: &'a BlockPartition,
        algorithm: &'a dyn VaAlgorithm<T>,
    ) -> Result<Self> {
        if partition.n_questions() != answers.n_questions() {
            return Err(Error::Dimension {
                what: "partition questions vs answer columns",
                expected: answers.n_questions(),
                found: partition.n_questions(),
            });
        }
        Ok(Self {
            answers,
            prior,
            partition,
            algorithm,
            denominator: Denominator::Scored,
            weights: None,
            keep_cells: false,
        })
    }

    pub fn with_denominator(mut self, d: Denominator) -> Self {
        self.denominator = d;
        self
    }

    /// Per-row weights, e.g. pattern probabilities of an enumerated distribution.
    pub fn with_weights(mut self, w: &'a [T]) -> Result<Self> {
        if w.len() != self.answers.n_rows() {
            return Err(Error::Dimension {
                what: "row weights",
                expected: self.answers.n_rows(),
                found: w.len(),
            });
        }
        self.weights = Some(w);
        Ok(self)
    }

    pub fn keep_cells(mut self, keep: bool) -> Self {
        self.keep_cells = keep;
        self
    }

    pub fn answers(&self) -> &'a AnswerMatrix {
        self.answers
    }

    pub fn prior(&self) -> &'a Prior<T> {
        self.prior
    }

    pub fn partition(&self) -> &'a BlockPartition {
        self.partition
    }

    pub fn algorithm(&self) -> &'a dyn VaAlgorithm<T> {
        self.algorithm
    }

    pub fn denominator(&self) -> Denominator {
        self.denominator
    }

    fn check(&self, pb: &Probbase<T>) -> Result<()> {
        validate_inputs(pb, self.prior, self.answers, self.partition)
    }

    #[inline]
    fn weight(&self, i: usize) -> T {
        self.weights.map_or(T::one(), |w| w[i])
    }

    /// Scores `pb`, returning the full breakdown.
    pub fn score(&self, pb: &Probbase<T>) -> Result<ImputationResult<T>> {
        self.check(pb)?;
        let kernel = Kernel::new(self, pb);
        let n = self.answers.n_rows();
        let b = self.partition.n_blocks();
        let keep = self.keep_cells;

        let rows: Vec<RowOutcome<T>> = (0..n)
            .into_par_iter()
            .map_init(
                || kernel.scratch(),
                |(sums, scratch), i| {
                    let mut cells = keep.then(Vec::new);
                    let mut losses = vec![T::zero(); b];
                    let count = match &kernel.terms {
                        Some(terms) => {
                            let row = self.answers.row(i);
                            kernel.block_sums(row, terms, sums);
                            kernel.row_losses(
                                i,
                                row,
                                sums,
                                None,
                                &mut losses,
                                scratch,
                                cells.as_mut(),
                            )
                        }
                        None => kernel.row_losses_generic(
                            i,
                            self.answers.row(i),
                            &mut losses,
                            cells.as_mut(),
                        ),
                    };
                    RowOutcome {
                        losses,
                        count,
                        cells,
                    }
                },
            )
            .collect();

        let mut per_block = vec![T::zero(); b];
        let mut scored_cells = 0usize;
        let mut scored_weight = T::zero();
        let mut per_cell = keep.then(Vec::new);
        for (i, out) in rows.into_iter().enumerate() {
            let w = self.weight(i);
            for (acc, &l) in per_block.iter_mut().zip(&out.losses) {
                *acc = *acc + w * l;
            }
            scored_cells += out.count;
            scored_weight = scored_weight + w * T::lit(out.count as f64);
            if let (Some(all), Some(c)) = (per_cell.as_mut(), out.cells) {
                all.extend(c);
            }
        }
        let total_loss: T = per_block.iter().copied().sum();
        let overall = self.finish(total_loss, scored_weight)?;
        Ok(ImputationResult {
            overall,
            per_block,
            per_cell,
            scored_cells,
            total_loss,
            denominator: self.denominator,
        })
    }

    /// Just the scalar objective.
    pub fn objective(&self, pb: &Probbase<T>) -> Result<T> {
        Ok((*self).keep_cells(false).score(pb)?.overall)
    }

    fn finish(&self, total_loss: T, scored_weight: T) -> Result<T> {
        let denom = match self.denominator {
            Denominator::Scored => scored_weight,
            Denominator::All => {
                let mass = match self.weights {
                    Some(w) => w.iter().copied().sum(),
                    None => T::lit(self.answers.n_rows() as f64),
                };
                mass * T::lit(self.answers.n_questions() as f64)
            }
        };
        if !(denom > T::zero()) {
            return Err(Error::NoScoredCells);
        }
        Ok(total_loss / denom)
    }

    /// Caches per-row partial sums at `base` so single-entry displacements
    /// can be rescored without recomputing unaffected rows.
    ///
    /// Returns `None` for algorithms without an additive decomposition.
    pub fn incremental(&self, base: &Probbase<T>) -> Result<Option<IncrementalScorer<'_, 'a, T>>> {
        self.check(base)?;
        let kernel = Kernel::new(self, base);
        let Some(terms) = kernel.terms.as_ref() else {
            return Ok(None);
        };
        let n = self.answers.n_rows();
        let (b, r) = (self.partition.n_blocks(), base.n_causes());
        let cached: Vec<(Vec<T>, Vec<T>, usize)> = (0..n)
            .into_par_iter()
            .map_init(
                || kernel.scratch(),
                |(_, scratch), i| {
                    let row = self.answers.row(i);
                    let mut sums = vec![T::zero(); b * r];
                    kernel.block_sums(row, terms, &mut sums);
                    let mut losses = vec![T::zero(); b];
                    let count = kernel.row_losses(i, row, &sums, None, &mut losses, scratch, None);
                    (sums, losses, count)
                },
            )
            .collect();
        let mut sums = Vec::with_capacity(n * b * r);
        let mut losses = Vec::with_capacity(n * b);
        let mut scored_weight = T::zero();
        for (i, (s, l, c)) in cached.into_iter().enumerate() {
            sums.extend(s);
            losses.extend(l);
            scored_weight = scored_weight + self.weight(i) * T::lit(c as f64);
        }
        Ok(Some(IncrementalScorer {
            ctx: self,
            base: base.clone(),
            sums,
            losses,
            scored_weight,
        }))
    }
}

struct RowOutcome<T> {
    losses: Vec<T>,
    count: usize,
    cells: Option<Vec<CellRecord<T>>>,
}

struct Scratch<T> {
    prefix: Vec<T>,
    suffix: Vec<T>,
    logits: Vec<T>,
}

/// Per-probbase precomputation shared by all rows.
struct Kernel<'c, 'a, T: Scalar> {
    ctx: &'c ScoringContext<'a, T>,
    pb: &'c Probbase<T>,
    terms: Option<AdditiveTerms<T>>,
    log_prior: Vec<T>,
    /// Probbase stored question-major: `qcol[k * r + j]`.
    qcol: Vec<T>,
    r: usize,
}

impl<'c, 'a, T: Scalar> Kernel<'c, 'a, T> {
    fn new(ctx: &'c ScoringContext<'a, T>, pb: &'c Probbase<T>) -> Self {
        let r = pb.n_causes();
        let qcol = (0..pb.n_questions()).flat_map(|k| pb.column(k)).collect();
        Self {
            ctx,
            pb,
            terms: ctx.algorithm.additive_terms(pb),
            log_prior: ctx.prior.probs().iter().map(|p| p.ln()).collect(),
            qcol,
            r,
        }
    }

    fn scratch(&self) -> (Vec<T>, Scratch<T>) {
        let b = self.ctx.partition.n_blocks();
        let sums = vec![T::zero(); b * self.r];
        let scratch = Scratch {
            prefix: vec![T::zero(); (b + 1) * self.r],
            suffix: vec![T::zero(); (b + 1) * self.r],
            logits: vec![T::zero(); self.r],
        };
        (sums, scratch)
    }

    /// Per-block sums of the additive log-weight terms, `sums[l * r + j]`.
    fn block_sums(&self, row: &[Answer], terms: &AdditiveTerms<T>, sums: &mut [T]) {
        let r = self.r;
        sums.iter_mut().for_each(|x| *x = T::zero());
        for (k, &a) in row.iter().enumerate() {
            let src = match a {
                Answer::Yes => &terms.yes,
                Answer::No => &terms.no,
                Answer::Missing => continue,
            };
            let l = self.ctx.partition.block_of(k);
            let dst = &mut sums[l * r..(l + 1) * r];
            for (d, &t) in dst.iter_mut().zip(&src[k * r..(k + 1) * r]) {
                *d = *d + t;
            }
        }
    }

    #[inline]
    fn is_scored(&self, a: Answer) -> bool {
        match self.ctx.denominator {
            Denominator::Scored => a.is_observed(),
            Denominator::All => true,
        }
    }

    /// Loss of every scored cell in block `l`, given the held-out posterior.
    fn block_loss(
        &self,
        i: usize,
        row: &[Answer],
        l: usize,
        posterior: &[T],
        cells: &mut Option<&mut Vec<CellRecord<T>>>,
    ) -> T {
        let r = self.r;
        let mut loss = T::zero();
        for &k in &self.ctx.partition.blocks()[l] {
            let a = row[k];
            if !self.is_scored(a) {
                continue;
            }
            let q = &self.qcol[k * r..(k + 1) * r];
            let f: T = posterior.iter().zip(q).map(|(&v, &q)| v * q).sum();
            loss = loss + cross_entropy(f, a.is_yes());
            if let Some(c) = cells.as_deref_mut() {
                c.push(CellRecord {
                    row: i,
                    question: k,
                    imputed: f,
                    observed: a,
                });
            }
        }
        loss
    }

    fn block_has_scored(&self, row: &[Answer], l: usize) -> usize {
        self.ctx.partition.blocks()[l]
            .iter()
            .filter(|&&k| self.is_scored(row[k]))
            .count()
    }

    /// Fills `losses[l]` for every block (or only `only`), returns the scored-cell count.
    #[allow(clippy::too_many_arguments)]
    fn row_losses(
        &self,
        i: usize,
        row: &[Answer],
        sums: &[T],
        only: Option<usize>,
        losses: &mut [T],
        scratch: &mut Scratch<T>,
        mut cells: Option<&mut Vec<CellRecord<T>>>,
    ) -> usize {
        let r = self.r;
        let b = self.ctx.partition.n_blocks();
        let Scratch {
            prefix,
            suffix,
            logits,
            ..
        } = scratch;
        prefix[..r].iter_mut().for_each(|x| *x = T::zero());
        for l in 0..b {
            for j in 0..r {
                prefix[(l + 1) * r + j] = prefix[l * r + j] + sums[l * r + j];
            }
        }
        suffix[b * r..(b + 1) * r]
            .iter_mut()
            .for_each(|x| *x = T::zero());
        for l in (0..b).rev() {
            for j in 0..r {
                suffix[l * r + j] = suffix[(l + 1) * r + j] + sums[l * r + j];
            }
        }
        let mut count = 0;
        for l in 0..b {
            let scored = self.block_has_scored(row, l);
            count += scored;
            if scored == 0 || only.is_some_and(|o| o != l) {
                continue;
            }
            for j in 0..r {
                logits[j] = self.log_prior[j] + (prefix[l * r + j] + suffix[(l + 1) * r + j]);
            }
            softmax_in_place(logits);
            losses[l] = self.block_loss(i, row, l, logits, &mut cells);
        }
        count
    }

    /// Path for algorithms without an additive decomposition.
    fn row_losses_generic(
        &self,
        i: usize,
        row: &[Answer],
        losses: &mut [T],
        mut cells: Option<&mut Vec<CellRecord<T>>>,
    ) -> usize {
        let mut masked = row.to_vec();
        let mut count = 0;
        for (l, block) in self.ctx.partition.blocks().iter().enumerate() {
            let scored = self.block_has_scored(row, l);
            count += scored;
            if scored == 0 {
                continue;
            }
            for &k in block {
                masked[k] = Answer::Missing;
            }
            let post = self
                .ctx
                .algorithm
                .posterior(&masked, self.pb, self.ctx.prior);
            losses[l] = self.block_loss(i, row, l, post.probs(), &mut cells);
            for &k in block {
                masked[k] = row[k];
            }
        }
        count
    }
}

/// Rescoring of single-entry displacements against cached row state.
pub struct IncrementalScorer<'c, 'a, T: Scalar> {
    ctx: &'c ScoringContext<'a, T>,
    base: Probbase<T>,
    sums: Vec<T>,
    losses: Vec<T>,
    scored_weight: T,
}

impl<'c, 'a, T: Scalar> IncrementalScorer<'c, 'a, T> {
    pub fn base(&self) -> &Probbase<T> {
        &self.base
    }

    /// Objective at `base` with entry `(j, k)` replaced by `value`.
    pub fn objective_with_entry(&self, j: usize, k: usize, value: T) -> Result<T> {
        let moved = self.base.with_entry(j, k, value)?;
        let kernel = Kernel::new(self.ctx, &moved);
        let terms = kernel.terms.as_ref().expect("additive algorithm");
        let old_terms = self
            .ctx
            .algorithm
            .additive_terms(&self.base)
            .expect("additive algorithm");
        let (b, r) = (self.ctx.partition.n_blocks(), moved.n_causes());
        let lk = self.ctx.partition.block_of(k);
        let answers = self.ctx.answers;

        let updated: Vec<Option<Vec<T>>> = (0..answers.n_rows())
            .into_par_iter()
            .map_init(
                || kernel.scratch(),
                |(sums, scratch), i| {
                    let row = answers.row(i);
                    let a = row[k];
                    let cached = &self.sums[i * b * r..(i + 1) * b * r];
                    let mut losses = self.losses[i * b..(i + 1) * b].to_vec();
                    if a.is_observed() {
                        sums.copy_from_slice(cached);
                        let idx = lk * r + j;
                        sums[idx] = sums[idx] + (terms.term(k, j, a) - old_terms.term(k, j, a));
                        losses.iter_mut().for_each(|x| *x = T::zero());
                        kernel.row_losses(i, row, sums, None, &mut losses, scratch, None);
                        Some(losses)
                    } else if kernel.is_scored(a) {
                        // Posteriors are unchanged; only the block holding k sees the new entry.
                        kernel.row_losses(i, row, cached, Some(lk), &mut losses, scratch, None);
                        Some(losses)
                    } else {
                        None
                    }
                },
            )
            .collect();

        let mut per_block = vec![T::zero(); b];
        for (i, new) in updated.iter().enumerate() {
            let w = self.ctx.weight(i);
            let l_row = new.as_deref().unwrap_or(&self.losses[i * b..(i + 1) * b]);
            for (acc, &l) in per_block.iter_mut().zip(l_row) {
                *acc = *acc + w * l;
            }
        }
        let total: T = per_block.iter().copied().sum();
        self.ctx.finish(total, self.scored_weight)
    }
}

/// `I_A(q)` with the answered-cells denominator.
pub fn imputation_accuracy<T: Scalar>(
    answers: &AnswerMatrix,
    pb: &Probbase<T>,
    prior: &Prior<T>,
    part: &BlockPartition,
    alg: &dyn VaAlgorithm<T>,
) -> Result<ImputationResult<T>> {
    ScoringContext::new(answers, prior, part, alg)?.score(pb)
}
