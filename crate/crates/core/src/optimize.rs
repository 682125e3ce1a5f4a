//! Cyclic coordinate descent on the imputation objective.
//!
//! Each selected entry in turn gets a finite-difference gradient and a
//! backtracking step `q - eta * gamma`, projected to the clamp box. A step is
//! kept only if it lowers the objective, so the trace is strictly
//! decreasing. The result is a local minimum at best.

use serde::{Deserialize, Serialize};

use crate::audit::finite_difference;
use crate::error::{Error, Result};
use crate::imputation::{IncrementalScorer, ScoringContext};
use crate::model::{Probbase, DEFAULT_CLAMP};
use crate::scalar::Scalar;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeConfig {
    /// `(cause, question)` pairs to move; all entries when `None`.
    pub entries: Option<Vec<(usize, usize)>>,
    pub initial_step: f64,
    pub shrink: f64,
    pub max_sweeps: usize,
    /// Stop once a whole sweep lowers the objective by less than this.
    pub tolerance: f64,
    /// Smallest decrease that counts as an improvement.
    pub min_decrease: f64,
    pub max_backtracks: usize,
    pub eps: f64,
    pub clamp: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            entries: None,
            initial_step: 0.5,
            shrink: 0.5,
            max_sweeps: 10,
            tolerance: 1e-7,
            min_decrease: 1e-12,
            max_backtracks: 30,
            eps: 0.01,
            clamp: DEFAULT_CLAMP,
        }
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Parameter(m.to_string()));
        if !(self.initial_step > 0.0) {
            return bad("initial step must be positive");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink factor must lie in (0, 1)");
        }
        if self.max_sweeps == 0 {
            return bad("at least one sweep is required");
        }
        if !(self.tolerance >= 0.0) || !(self.min_decrease >= 0.0) {
            return bad("tolerances must be non-negative");
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return bad("finite-difference step must lie in (0, 0.5)");
        }
        if !(self.clamp >= 0.0 && self.clamp < 0.5) {
            return bad("clamp must lie in [0, 0.5)");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceStep {
    pub sweep: usize,
    pub cause: usize,
    pub question: usize,
    pub gamma: f64,
    pub old_value: f64,
    pub new_value: f64,
    pub objective: f64,
}

#[derive(Clone, Debug)]
pub struct OptimizeResult<T: Scalar> {
    pub probbase: Probbase<T>,
    pub initial_objective: f64,
    pub final_objective: f64,
    /// Accepted steps only.
    pub trace: Vec<TraceStep>,
    pub sweeps: usize,
    pub converged: bool,
}

impl<T: Scalar> OptimizeResult<T> {
    /// Coordinate descent finds local minima only.
    pub fn optimum_kind(&self) -> &'static str {
        "local"
    }
}

enum Evaluator<'c, 'a, T: Scalar> {
    Incremental(IncrementalScorer<'c, 'a, T>),
    Full(&'c ScoringContext<'a, T>, Probbase<T>),
}

impl<'c, 'a, T: Scalar> Evaluator<'c, 'a, T> {
    fn build(ctx: &'c ScoringContext<'a, T>, pb: Probbase<T>) -> Result<Self> {
        Ok(match ctx.incremental(&pb)? {
            Some(inc) => Self::Incremental(inc),
            None => Self::Full(ctx, pb),
        })
    }

    fn base(&self) -> &Probbase<T> {
        match self {
            Self::Incremental(inc) => inc.base(),
            Self::Full(_, pb) => pb,
        }
    }

    fn eval(&self, j: usize, k: usize, v: T) -> Result<T> {
        match self {
            Self::Incremental(inc) => inc.objective_with_entry(j, k, v),
            Self::Full(ctx, pb) => ctx.objective(&pb.with_entry(j, k, v)?),
        }
    }
}

/// Runs coordinate descent from `start`.
pub fn descend<T: Scalar>(
    start: &Probbase<T>,
    cfg: &OptimizeConfig,
    ctx: &ScoringContext<'_, T>,
) -> Result<OptimizeResult<T>> {
    cfg.validate()?;
    let (r, s) = (start.n_causes(), start.n_questions());
    let entries: Vec<(usize, usize)> = match &cfg.entries {
        Some(e) => {
            for &(j, k) in e {
                if j >= r || k >= s {
                    return Err(Error::Index {
                        what: "optimizer entry",
                        index: j * s + k,
                        len: r * s,
                    });
                }
            }
            e.clone()
        }
        None => (0..r).flat_map(|j| (0..s).map(move |k| (j, k))).collect(),
    };
    let (lo, hi) = (T::lit(cfg.clamp), T::one() - T::lit(cfg.clamp));
    let projected = start.map(|_, _, v| v.max(lo).min(hi))?;
    if &projected != start {
        log::warn!(
            "starting probbase projected into [{}, {}]",
            cfg.clamp,
            1.0 - cfg.clamp
        );
    }
    let mut current = ctx.objective(&projected)?;
    let initial_objective = current.as_f64();
    let mut eval = Evaluator::build(ctx, projected)?;
    let eps = T::lit(cfg.eps);
    let mut trace = Vec::new();
    let mut sweeps = 0;
    let mut converged = false;

    for sweep in 0..cfg.max_sweeps {
        sweeps = sweep + 1;
        let sweep_start = current;
        for &(j, k) in &entries {
            let value = eval.base().get(j, k);
            let grad =
                finite_difference(value, eps, lo, hi, Some(current), |v| eval.eval(j, k, v))?;
            let gamma = T::lit(grad.gamma);
            if gamma == T::zero() {
                continue;
            }
            let mut eta = T::lit(cfg.initial_step);
            let mut accepted = None;
            for _ in 0..=cfg.max_backtracks {
                let proposal = (value - eta * gamma).max(lo).min(hi);
                if proposal == value {
                    break;
                }
                let obj = eval.eval(j, k, proposal)?;
                if (current - obj).as_f64() > cfg.min_decrease {
                    accepted = Some((proposal, obj));
                    break;
                }
                eta = eta * T::lit(cfg.shrink);
            }
            if let Some((proposal, obj)) = accepted {
                let next = eval.base().with_entry(j, k, proposal)?;
                eval = Evaluator::build(ctx, next)?;
                current = obj;
                trace.push(TraceStep {
                    sweep,
                    cause: j,
                    question: k,
                    gamma: grad.gamma,
                    old_value: value.as_f64(),
                    new_value: proposal.as_f64(),
                    objective: obj.as_f64(),
                });
            }
        }
        if (sweep_start - current).as_f64() < cfg.tolerance {
            converged = true;
            break;
        }
    }
    let probbase = eval.base().clone();
    Ok(OptimizeResult {
        probbase,
        initial_objective,
        final_objective: current.as_f64(),
        trace,
        sweeps,
        converged,
    })
}
