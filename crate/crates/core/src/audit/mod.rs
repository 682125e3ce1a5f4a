//! Entry-level audit of a probbase: perturbation generators, the
//! finite-difference sensitivity `gamma_jk`, sign classification and
//! rank-based evaluation against a known truth.

mod gradient;
mod metrics;
mod perturb;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gradient::{
    audit_probbase, finite_difference, gradient_entry, plot_transform, roc_inputs, AuditConfig,
    AuditEntry, AuditMetrics, AuditMode, AuditReport, ClassRule, Difference, Flag,
    GradientEstimate, RocVariant, DEFAULT_EPS, DEFAULT_TAU,
};
pub use metrics::{
    median, midranks, roc_auc, roc_auc_split, roc_curve, wilcoxon_rank_sum, RocAuc, RocPoint,
    WilcoxonTest,
};
pub use perturb::{
    perturb_probbase, Perturbation, PerturbationKind, PerturbationSpec, DEFAULT_ELIGIBILITY,
    DEFAULT_OFFSET, DEFAULT_SD, DEFAULT_SPARSE_COUNT,
};

/// Direction of a perturbation or of a classified gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "-")]
    Neg,
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "+")]
    Pos,
}

impl Sign {
    /// `+` above `tau`, `-` below `-tau`, otherwise `0`.
    pub fn of(x: f64, tau: f64) -> Self {
        if x > tau {
            Sign::Pos
        } else if x < -tau {
            Sign::Neg
        } else {
            Sign::Zero
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Neg => -1,
            Sign::Zero => 0,
            Sign::Pos => 1,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Neg => "-",
            Sign::Zero => "0",
            Sign::Pos => "+",
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Sign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+" | "1" | "+1" => Ok(Sign::Pos),
            "-" | "-1" => Ok(Sign::Neg),
            "0" => Ok(Sign::Zero),
            other => Err(Error::Parameter(format!("unknown sign '{other}'"))),
        }
    }
}
