//! Audit of a probbase where a third of the large entries were raised, a
//! third lowered and a third left alone.

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{prepare, Check, ExperimentConfig};
use crate::audit::{
    audit_probbase, perturb_probbase, roc_curve, AuditConfig, AuditMetrics, AuditMode, AuditReport,
    ClassRule, PerturbationKind, PerturbationSpec, RocVariant, Sign,
};
use crate::error::Result;
use crate::io::{write_records, write_report, write_roc};
use crate::rng::derive_seed;

pub const DENSITY_BINS: usize = 40;

#[derive(Clone, Debug)]
pub struct SignedOffsetResult {
    /// One report per independent instance.
    pub reports: Vec<AuditReport>,
    /// All instances' entries together; metrics are computed on this.
    pub pooled: AuditReport,
    pub metrics: AuditMetrics,
    pub tau: f64,
    pub flag_share: f64,
    /// Entries flagged with `|gamma| > tau`, and how many match the truth.
    pub tau_flagged: usize,
    pub tau_agree: usize,
    /// The same for the top `flag_share` of pooled entries by `|gamma|`.
    pub share_flagged: usize,
    pub share_agree: usize,
    pub share_threshold: f64,
}

#[derive(Clone, Debug, Serialize)]
struct DensityRow {
    atan_gamma: f64,
    plus: f64,
    zero: f64,
    minus: f64,
}

#[derive(Clone, Debug, Serialize)]
struct MetricRow {
    metric: String,
    value: f64,
}

fn audit_instance(cfg: &ExperimentConfig, seed: u64) -> Result<AuditReport> {
    let prep = prepare(cfg, seed)?;
    let truth_pb = &prep.inst.probbase;
    let kind = PerturbationKind::SignedOffset {
        offset: cfg.offset,
        threshold: cfg.eligibility,
        count: None,
    };
    let perturbed = perturb_probbase(
        truth_pb,
        &PerturbationSpec::new(kind, derive_seed(seed, 20)),
        cfg.clamp,
    )?;
    let s = truth_pb.n_questions();
    let eligible: Vec<(usize, usize)> = (0..truth_pb.n_causes())
        .flat_map(|j| (0..s).map(move |k| (j, k)))
        .filter(|&(j, k)| truth_pb.get(j, k) > cfg.eligibility)
        .collect();
    log::info!("auditing {} eligible entries", eligible.len());
    let alg = cfg.algorithm;
    let ctx = prep.context(&alg, cfg)?;
    let audit_cfg = AuditConfig {
        eps: cfg.eps,
        clamp: cfg.clamp,
        rule: ClassRule::Threshold(cfg.tau),
        mode: AuditMode::Incremental,
        entries: Some(eligible),
    };
    audit_probbase(&perturbed.probbase, &ctx, &audit_cfg)?.with_truth(&perturbed.truth)
}

/// Audits `cfg.runs` independent instances and pools their entries.
pub fn run_signed_offset_audit(cfg: &ExperimentConfig) -> Result<SignedOffsetResult> {
    cfg.validate()?;
    let reports = (0..cfg.runs)
        .map(|run| audit_instance(cfg, derive_seed(cfg.seed, run as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut pooled = reports[0].clone();
    pooled.entries = reports
        .iter()
        .flat_map(|r| r.entries.iter().cloned())
        .collect();
    pooled.base_objective = f64::NAN;
    let metrics = pooled.metrics()?;

    let gammas: Vec<f64> = pooled.entries.iter().map(|e| e.gamma).collect();
    let share_classes = ClassRule::TopFraction(cfg.flag_share).classify(&gammas);
    let (mut share_flagged, mut share_agree) = (0, 0);
    let mut share_threshold = f64::INFINITY;
    for (e, c) in pooled.entries.iter().zip(&share_classes) {
        if *c != Sign::Zero {
            share_flagged += 1;
            share_threshold = share_threshold.min(e.gamma.abs());
            share_agree += (e.truth == Some(*c)) as usize;
        }
    }
    Ok(SignedOffsetResult {
        tau: cfg.tau,
        flag_share: cfg.flag_share,
        tau_flagged: metrics.flagged,
        tau_agree: metrics.flagged_agree,
        share_flagged,
        share_agree,
        share_threshold,
        reports,
        pooled,
        metrics,
    })
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        f64::NAN
    } else {
        a as f64 / b as f64
    }
}

impl SignedOffsetResult {
    pub fn auc(&self, v: RocVariant) -> Option<f64> {
        self.metrics.roc(v).map(|r| r.auc)
    }

    pub fn tau_agreement(&self) -> f64 {
        ratio(self.tau_agree, self.tau_flagged)
    }

    pub fn share_agreement(&self) -> f64 {
        ratio(self.share_agree, self.share_flagged)
    }

    fn metric_rows(&self) -> Vec<MetricRow> {
        let m = &self.metrics;
        let mut rows = Vec::new();
        let mut push = |name: &str, v: f64| {
            rows.push(MetricRow {
                metric: name.to_string(),
                value: v,
            })
        };
        push("n_pos", m.n_pos as f64);
        push("n_zero", m.n_zero as f64);
        push("n_neg", m.n_neg as f64);
        for v in RocVariant::ALL {
            if let Some(r) = m.roc(v) {
                push(&format!("auc_{}", v.as_str()), r.auc);
                push(&format!("auc_se_{}", v.as_str()), r.se);
            }
        }
        for (name, w) in [
            ("pos_vs_zero", m.wilcoxon_pos_zero),
            ("neg_vs_zero", m.wilcoxon_neg_zero),
            ("pos_vs_neg", m.wilcoxon_pos_neg),
        ] {
            if let Some(w) = w {
                push(
                    &format!("wilcoxon_log10_p_{name}"),
                    w.log_p / std::f64::consts::LN_10,
                );
            }
        }
        for (name, v) in [
            ("median_pos", m.median_pos),
            ("median_zero", m.median_zero),
            ("median_neg", m.median_neg),
        ] {
            if let Some(v) = v {
                push(name, v);
            }
        }
        push("tau", self.tau);
        push("tau_flagged", self.tau_flagged as f64);
        push("tau_flagged_fraction", m.flagged_fraction);
        push("tau_agreement", self.tau_agreement());
        push("share", self.flag_share);
        push("share_flagged", self.share_flagged as f64);
        push("share_threshold", self.share_threshold);
        push("share_agreement", self.share_agreement());
        push("instances", self.reports.len() as f64);
        push("one_sided", self.pooled.one_sided_count() as f64);
        rows
    }

    pub(crate) fn lines(&self) -> Vec<String> {
        self.metric_rows()
            .iter()
            .map(|r| format!("{}: {}", r.metric, r.value))
            .collect()
    }

    pub(crate) fn checks(&self) -> Vec<Check> {
        let m = &self.metrics;
        let auc = |v| self.auc(v).unwrap_or(f64::NAN);
        let log10_p = |w: Option<crate::audit::WilcoxonTest>| {
            w.map_or(f64::NAN, |w| w.log_p / std::f64::consts::LN_10)
        };
        let ordered = match (m.median_pos, m.median_zero, m.median_neg) {
            (Some(p), Some(z), Some(n)) => (p > z && z > n) as u8 as f64,
            _ => 0.0,
        };
        vec![
            Check::within("auc_pos_vs_neg", auc(RocVariant::PosVsNeg), 0.70, 0.95),
            Check::at_least("auc_pos_vs_zero", auc(RocVariant::PosVsZero), 0.65),
            Check::at_least("auc_neg_vs_zero", auc(RocVariant::NegVsZero), 0.65),
            Check::at_most(
                "wilcoxon_log10_p_pos_vs_zero",
                log10_p(m.wilcoxon_pos_zero),
                -10.0,
            ),
            Check::at_most(
                "wilcoxon_log10_p_neg_vs_zero",
                log10_p(m.wilcoxon_neg_zero),
                -10.0,
            ),
            Check::at_least("median_order_pos_zero_neg", ordered, 1.0),
            Check::at_least("share_flag_agreement", self.share_agreement(), 0.95),
        ]
    }

    /// Histogram densities of `atan(100 gamma)` per true class.
    fn density(&self) -> Vec<DensityRow> {
        let width = 2.0 * FRAC_PI_2 / DENSITY_BINS as f64;
        let mut counts = [[0usize; DENSITY_BINS]; 3];
        let mut totals = [0usize; 3];
        for e in &self.pooled.entries {
            let c = match e.truth {
                Some(Sign::Pos) => 0,
                Some(Sign::Zero) => 1,
                Some(Sign::Neg) => 2,
                None => continue,
            };
            let bin = (((e.transformed + FRAC_PI_2) / width) as usize).min(DENSITY_BINS - 1);
            counts[c][bin] += 1;
            totals[c] += 1;
        }
        let dens = |c: usize, b: usize| {
            if totals[c] == 0 {
                0.0
            } else {
                counts[c][b] as f64 / (totals[c] as f64 * width)
            }
        };
        (0..DENSITY_BINS)
            .map(|b| DensityRow {
                atan_gamma: -FRAC_PI_2 + (b as f64 + 0.5) * width,
                plus: dens(0, b),
                zero: dens(1, b),
                minus: dens(2, b),
            })
            .collect()
    }

    pub(crate) fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut files = Vec::new();
        for (i, report) in self.reports.iter().enumerate() {
            let p = dir.join(format!("audit_report_{i}.csv"));
            write_report(&p, report)?;
            files.push(p);
        }
        let p = dir.join("density.csv");
        write_records(&p, &self.density())?;
        files.push(p);
        for v in RocVariant::ALL {
            let (scores, labels) = self.pooled.roc_data(v);
            if let Ok(points) = roc_curve(&scores, &labels) {
                let p = dir.join(format!("roc_{}.csv", v.as_str()));
                write_roc(&p, &points)?;
                files.push(p);
            }
        }
        let p = dir.join("metrics.csv");
        write_records(&p, &self.metric_rows())?;
        files.push(p);
        Ok(files)
    }
}
