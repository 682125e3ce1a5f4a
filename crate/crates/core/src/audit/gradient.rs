//! Central finite differences of the imputation objective, one entry at a time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{median, roc_auc_split, wilcoxon_rank_sum, RocAuc, WilcoxonTest};
use super::Sign;
use crate::error::{Error, Result};
use crate::imputation::ScoringContext;
use crate::model::{Probbase, DEFAULT_CLAMP};
use crate::scalar::Scalar;

pub const DEFAULT_EPS: f64 = 0.01;
pub const DEFAULT_TAU: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difference {
    Central,
    Forward,
    Backward,
}

impl Difference {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Central => "central",
            Self::Forward => "forward",
            Self::Backward => "backward",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientEstimate {
    pub gamma: f64,
    pub scheme: Difference,
}

/// Difference quotient of `f` at `value`, staying inside `[lo, hi]`.
///
/// Falls back to a one-sided quotient when `value +- eps` leaves the box;
/// `base` is `f(value)` if already known.
pub fn finite_difference<T: Scalar>(
    value: T,
    eps: T,
    lo: T,
    hi: T,
    base: Option<T>,
    mut f: impl FnMut(T) -> Result<T>,
) -> Result<GradientEstimate> {
    if !(eps > T::zero()) {
        return Err(Error::Parameter(format!(
            "finite-difference step {eps} must be positive"
        )));
    }
    let up = value + eps <= hi;
    let down = value - eps >= lo;
    let mut at_value = || base.map_or_else(|| f(value), Ok);
    let (gamma, scheme) = match (down, up) {
        (true, true) => (
            (f(value + eps)? - f(value - eps)?) / (eps + eps),
            Difference::Central,
        ),
        (false, true) => {
            let b = at_value()?;
            ((f(value + eps)? - b) / eps, Difference::Forward)
        }
        (true, false) => {
            let b = at_value()?;
            ((b - f(value - eps)?) / eps, Difference::Backward)
        }
        (false, false) => {
            return Err(Error::Parameter(format!(
                "step {eps} does not fit inside [{lo}, {hi}] around {value}"
            )));
        }
    };
    Ok(GradientEstimate {
        gamma: gamma.as_f64(),
        scheme,
    })
}

/// `gamma_jk`: derivative of the objective with only entry `(j, k)` displaced.
pub fn gradient_entry<T: Scalar>(
    pb: &Probbase<T>,
    j: usize,
    k: usize,
    eps: T,
    clamp: T,
    ctx: &ScoringContext<'_, T>,
) -> Result<GradientEstimate> {
    check_entry(pb, j, k)?;
    finite_difference(pb.get(j, k), eps, clamp, T::one() - clamp, None, |v| {
        ctx.objective(&pb.with_entry(j, k, v)?)
    })
}

fn check_entry<T: Scalar>(pb: &Probbase<T>, j: usize, k: usize) -> Result<()> {
    if j >= pb.n_causes() {
        return Err(Error::Index {
            what: "cause",
            index: j,
            len: pb.n_causes(),
        });
    }
    if k >= pb.n_questions() {
        return Err(Error::Index {
            what: "question",
            index: k,
            len: pb.n_questions(),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditMode {
    /// Rescore the whole objective for every displacement.
    #[default]
    Full,
    /// Reuse cached per-row state; needs an additive algorithm.
    Incremental,
}

/// How gammas become signs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum ClassRule {
    /// `+` above `tau`, `-` below `-tau`, else `0`.
    Threshold(f64),
    /// Only the given fraction of entries with the largest `|gamma|` get a sign.
    TopFraction(f64),
}

impl Default for ClassRule {
    fn default() -> Self {
        Self::Threshold(DEFAULT_TAU)
    }
}

impl ClassRule {
    pub fn classify(&self, gammas: &[f64]) -> Vec<Sign> {
        match *self {
            Self::Threshold(tau) => gammas.iter().map(|&g| Sign::of(g, tau)).collect(),
            Self::TopFraction(f) => {
                let keep = ((f * gammas.len() as f64).round() as usize).min(gammas.len());
                let mut idx: Vec<usize> = (0..gammas.len()).collect();
                idx.sort_by(|&a, &b| gammas[b].abs().total_cmp(&gammas[a].abs()).then(a.cmp(&b)));
                let mut out = vec![Sign::Zero; gammas.len()];
                for &i in &idx[..keep] {
                    out[i] = Sign::of(gammas[i], 0.0);
                }
                out
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct AuditConfig {
    pub eps: f64,
    pub clamp: f64,
    pub rule: ClassRule,
    pub mode: AuditMode,
    /// `(cause, question)` pairs; all entries when `None`.
    pub entries: Option<Vec<(usize, usize)>>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            clamp: DEFAULT_CLAMP,
            rule: ClassRule::default(),
            mode: AuditMode::Full,
            entries: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AuditEntry {
    pub cause: usize,
    pub question: usize,
    pub value: f64,
    pub gamma: f64,
    /// `atan(100 * gamma)`, for plotting.
    pub transformed: f64,
    pub class: Sign,
    pub scheme: Difference,
    pub truth: Option<Sign>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Flag {
    pub cause: usize,
    pub question: usize,
    pub gamma: f64,
    pub sign: Sign,
}

#[derive(Clone, Debug)]
pub struct AuditReport {
    pub cause_labels: Vec<String>,
    pub question_labels: Vec<String>,
    pub eps: f64,
    pub rule: ClassRule,
    pub base_objective: f64,
    pub entries: Vec<AuditEntry>,
}

pub fn plot_transform(gamma: f64) -> f64 {
    (100.0 * gamma).atan()
}

/// Audits the requested entries of `pb`, in parallel over entries.
pub fn audit_probbase<T: Scalar>(
    pb: &Probbase<T>,
    ctx: &ScoringContext<'_, T>,
    cfg: &AuditConfig,
) -> Result<AuditReport> {
    let (r, s) = (pb.n_causes(), pb.n_questions());
    let entries: Vec<(usize, usize)> = match &cfg.entries {
        Some(e) => {
            for &(j, k) in e {
                check_entry(pb, j, k)?;
            }
            e.clone()
        }
        None => (0..r).flat_map(|j| (0..s).map(move |k| (j, k))).collect(),
    };
    let base = ctx.objective(pb)?;
    let (eps, lo, hi) = (
        T::lit(cfg.eps),
        T::lit(cfg.clamp),
        T::one() - T::lit(cfg.clamp),
    );
    let incremental = match cfg.mode {
        AuditMode::Full => None,
        AuditMode::Incremental => {
            let inc = ctx.incremental(pb)?;
            if inc.is_none() {
                log::warn!(
                    "algorithm {} has no additive form; auditing in full mode",
                    ctx.algorithm().name()
                );
            }
            inc
        }
    };
    let estimates: Vec<GradientEstimate> = entries
        .par_iter()
        .map(|&(j, k)| {
            let value = pb.get(j, k);
            match &incremental {
                Some(inc) => finite_difference(value, eps, lo, hi, Some(base), |v| {
                    inc.objective_with_entry(j, k, v)
                }),
                None => finite_difference(value, eps, lo, hi, Some(base), |v| {
                    ctx.objective(&pb.with_entry(j, k, v)?)
                }),
            }
        })
        .collect::<Result<_>>()?;
    let one_sided = estimates
        .iter()
        .filter(|e| e.scheme != Difference::Central)
        .count();
    if one_sided > 0 {
        log::warn!("{one_sided} entries used one-sided differences near the box edge");
    }
    let gammas: Vec<f64> = estimates.iter().map(|e| e.gamma).collect();
    let classes = cfg.rule.classify(&gammas);
    let entries = entries
        .iter()
        .zip(&estimates)
        .zip(classes)
        .map(|((&(j, k), e), class)| AuditEntry {
            cause: j,
            question: k,
            value: pb.get(j, k).as_f64(),
            gamma: e.gamma,
            transformed: plot_transform(e.gamma),
            class,
            scheme: e.scheme,
            truth: None,
        })
        .collect();
    Ok(AuditReport {
        cause_labels: pb.cause_labels().to_vec(),
        question_labels: pb.question_labels().to_vec(),
        eps: cfg.eps,
        rule: cfg.rule,
        base_objective: base.as_f64(),
        entries,
    })
}

/// The three two-class comparisons of audited gammas against known truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RocVariant {
    /// `+` entries (positive) against `-` entries, scored by `gamma`.
    PosVsNeg,
    /// `+` entries against unperturbed ones, scored by `gamma`.
    PosVsZero,
    /// `-` entries against unperturbed ones, scored by `-gamma`.
    NegVsZero,
}

impl RocVariant {
    pub const ALL: [RocVariant; 3] = [Self::PosVsNeg, Self::PosVsZero, Self::NegVsZero];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::PosVsNeg => "pos_vs_neg",
            Self::PosVsZero => "pos_vs_zero",
            Self::NegVsZero => "neg_vs_zero",
        }
    }
}

impl std::str::FromStr for RocVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown ROC variant '{s}'")))
    }
}

/// Splits `(gamma, truth)` pairs into ROC scores and labels. Entries outside
/// the two compared classes are dropped; `NegVsZero` scores by `-gamma`.
pub fn roc_inputs(
    pairs: impl IntoIterator<Item = (f64, Option<Sign>)>,
    v: RocVariant,
) -> (Vec<f64>, Vec<bool>) {
    let (pos, neg, flip) = match v {
        RocVariant::PosVsNeg => (Sign::Pos, Sign::Neg, false),
        RocVariant::PosVsZero => (Sign::Pos, Sign::Zero, false),
        RocVariant::NegVsZero => (Sign::Neg, Sign::Zero, true),
    };
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (gamma, truth) in pairs {
        let label = match truth {
            Some(t) if t == pos => true,
            Some(t) if t == neg => false,
            _ => continue,
        };
        scores.push(if flip { -gamma } else { gamma });
        labels.push(label);
    }
    (scores, labels)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct AuditMetrics {
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_zero: usize,
    pub roc_pos_neg: Option<RocAuc>,
    pub roc_pos_zero: Option<RocAuc>,
    pub roc_neg_zero: Option<RocAuc>,
    pub wilcoxon_pos_zero: Option<WilcoxonTest>,
    pub wilcoxon_neg_zero: Option<WilcoxonTest>,
    pub wilcoxon_pos_neg: Option<WilcoxonTest>,
    pub median_pos: Option<f64>,
    pub median_zero: Option<f64>,
    pub median_neg: Option<f64>,
    /// Entries given a nonzero class by the report's rule.
    pub flagged: usize,
    /// Flagged entries whose class equals the truth.
    pub flagged_agree: usize,
    pub flagged_fraction: f64,
}

impl AuditMetrics {
    pub fn flag_agreement(&self) -> Option<f64> {
        (self.flagged > 0).then(|| self.flagged_agree as f64 / self.flagged as f64)
    }

    pub fn roc(&self, v: RocVariant) -> Option<RocAuc> {
        match v {
            RocVariant::PosVsNeg => self.roc_pos_neg,
            RocVariant::PosVsZero => self.roc_pos_zero,
            RocVariant::NegVsZero => self.roc_neg_zero,
        }
    }
}

impl AuditReport {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_causes(&self) -> usize {
        self.cause_labels.len()
    }

    pub fn n_questions(&self) -> usize {
        self.question_labels.len()
    }

    pub fn gamma(&self, j: usize, k: usize) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.cause == j && e.question == k)
            .map(|e| e.gamma)
    }

    /// Row-major `r x s` gammas, `None` where not audited.
    pub fn gamma_matrix(&self) -> Vec<Option<f64>> {
        let s = self.n_questions();
        let mut out = vec![None; self.n_causes() * s];
        for e in &self.entries {
            out[e.cause * s + e.question] = Some(e.gamma);
        }
        out
    }

    pub fn one_sided_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.scheme != Difference::Central)
            .count()
    }

    /// Entries with `|gamma| > tau`.
    pub fn high_confidence_flags(&self, tau: f64) -> Vec<Flag> {
        self.entries
            .iter()
            .filter(|e| e.gamma.abs() > tau)
            .map(|e| Flag {
                cause: e.cause,
                question: e.question,
                gamma: e.gamma,
                sign: Sign::of(e.gamma, 0.0),
            })
            .collect()
    }

    /// Attaches the true direction `truth[j * s + k]` to every audited entry.
    pub fn with_truth(mut self, truth: &[Sign]) -> Result<Self> {
        let n = self.n_causes() * self.n_questions();
        if truth.len() != n {
            return Err(Error::Dimension {
                what: "truth table",
                expected: n,
                found: truth.len(),
            });
        }
        let s = self.n_questions();
        for e in &mut self.entries {
            e.truth = Some(truth[e.cause * s + e.question]);
        }
        Ok(self)
    }

    fn gammas_with_truth(&self, sign: Sign) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| e.truth == Some(sign))
            .map(|e| e.gamma)
            .collect()
    }

    /// Scores and labels for one ROC comparison.
    pub fn roc_data(&self, v: RocVariant) -> (Vec<f64>, Vec<bool>) {
        roc_inputs(self.entries.iter().map(|e| (e.gamma, e.truth)), v)
    }

    /// ROC, rank-sum and flag statistics; needs truth attached.
    pub fn metrics(&self) -> Result<AuditMetrics> {
        if self.entries.iter().any(|e| e.truth.is_none()) {
            return Err(Error::Stats("audit metrics need the truth table".into()));
        }
        let pos = self.gammas_with_truth(Sign::Pos);
        let neg = self.gammas_with_truth(Sign::Neg);
        let zero = self.gammas_with_truth(Sign::Zero);
        let negated = |v: &[f64]| v.iter().map(|g| -g).collect::<Vec<_>>();
        let roc = |a: &[f64], b: &[f64]| roc_auc_split(a, b).ok();
        let wil = |a: &[f64], b: &[f64]| wilcoxon_rank_sum(a, b).ok();
        let flagged: Vec<&AuditEntry> = self
            .entries
            .iter()
            .filter(|e| e.class != Sign::Zero)
            .collect();
        let flagged_agree = flagged.iter().filter(|e| e.truth == Some(e.class)).count();
        Ok(AuditMetrics {
            n_pos: pos.len(),
            n_neg: neg.len(),
            n_zero: zero.len(),
            roc_pos_neg: roc(&pos, &neg),
            roc_pos_zero: roc(&pos, &zero),
            roc_neg_zero: roc(&negated(&neg), &negated(&zero)),
            wilcoxon_pos_zero: wil(&pos, &zero),
            wilcoxon_neg_zero: wil(&neg, &zero),
            wilcoxon_pos_neg: wil(&pos, &neg),
            median_pos: median(&pos),
            median_zero: median(&zero),
            median_neg: median(&neg),
            flagged: flagged.len(),
            flagged_agree,
            flagged_fraction: if self.is_empty() {
                0.0
            } else {
                flagged.len() as f64 / self.len() as f64
            },
        })
    }
}
