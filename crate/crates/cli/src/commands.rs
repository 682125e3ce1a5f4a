use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use vaimpute::audit::{
    audit_probbase, roc_auc, roc_curve, roc_inputs, AuditConfig, AuditMetrics, AuditMode,
    ClassRule, RocVariant, Sign,
};
use vaimpute::blocks::{
    estimate_block_covariances, learn_partition, pairwise_association, DendrogramCut, Linkage,
};
use vaimpute::experiments::run_experiment;
use vaimpute::io;
use vaimpute::optimize::{descend, OptimizeConfig};
use vaimpute::simulate::{simulate_dataset, CovarianceModel, SimulationConfig};
use vaimpute::{
    clamp_probbase, Algorithm, AnswerMatrix, BlockPartition, Prior, Probbase, ScoringContext,
};

use crate::config::{load_experiment, load_simulate, CovarianceSpec, SimulateFile};
use crate::{
    AuditArgs, BlocksArgs, Cli, Command, DataArgs, ExperimentArgs, LinkageArg, ModeArg,
    OptimizeArgs, Outcome, RocArgs, ScoreArgs, SimulateArgs, UsageError,
};

const DEFAULT_SEED: u64 = 1;

pub fn run(cli: &Cli) -> Result<Outcome> {
    if !(cli.eps_clamp > 0.0 && cli.eps_clamp < 0.5) {
        bail!(UsageError(format!(
            "--eps-clamp {} must lie in (0, 0.5)",
            cli.eps_clamp
        )));
    }
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Score(a) => score(cli, a),
        Command::Audit(a) => audit(cli, a),
        Command::Optimize(a) => optimize(cli, a),
        Command::Blocks(a) => blocks(a),
        Command::Roc(a) => roc(a),
        Command::Experiment(a) => experiment(cli, a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn load_probbase(path: &Path, codes: Option<&Path>) -> Result<Probbase> {
    Ok(match codes {
        Some(c) => io::read_letter_probbase(path, &io::read_letter_table(c)?)?,
        None => io::read_probbase(path)?,
    })
}

fn load_prior(path: Option<&Path>, pb: &Probbase) -> Result<Prior> {
    Ok(match path {
        Some(p) => io::read_prior(p)?,
        None => Prior::uniform(pb.cause_labels().to_vec())?,
    })
}

fn load_partition(path: Option<&Path>, question_labels: &[String]) -> Result<BlockPartition> {
    Ok(match path {
        Some(p) => io::read_partition(p, question_labels)?,
        None => BlockPartition::singletons(question_labels.len()),
    })
}

/// Answers, prior and partition for a probbase whose labels are already known.
struct Inputs {
    answers: AnswerMatrix,
    prior: Prior,
    partition: BlockPartition,
    algorithm: Algorithm,
}

impl Inputs {
    fn load(data: &DataArgs, pb: &Probbase) -> Result<Self> {
        let answers = io::read_answers(&data.answers)?;
        let prior = load_prior(data.prior.as_deref(), pb)?;
        let partition = load_partition(data.partition.as_deref(), answers.question_labels())?;
        vaimpute::validate_inputs(pb, &prior, &answers, &partition)?;
        Ok(Self {
            answers,
            prior,
            partition,
            algorithm: data.algorithm.into(),
        })
    }

    fn context(&self, data: &DataArgs) -> Result<ScoringContext<'_, f64>> {
        Ok(
            ScoringContext::new(&self.answers, &self.prior, &self.partition, &self.algorithm)?
                .with_denominator(data.denominator.into()),
        )
    }
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<Outcome> {
    let file = match &a.config {
        Some(p) => load_simulate(p)?,
        None => SimulateFile::default(),
    };
    let Some(pb_path) = a.probbase.clone().or(file.probbase) else {
        bail!(UsageError(
            "simulate needs a probbase (--probbase or `probbase` in the config)".into()
        ));
    };
    let Some(n) = a.n.or(file.n) else {
        bail!(UsageError(
            "simulate needs an interview count (--n or `n` in the config)".into()
        ));
    };
    let codes = a.letter_codes.clone().or(file.letter_codes);
    let pb = load_probbase(&pb_path, codes.as_deref())?;
    let prior = load_prior(a.prior.as_deref().or(file.prior.as_deref()), &pb)?;
    let partition = load_partition(
        a.partition.as_deref().or(file.partition.as_deref()),
        pb.question_labels(),
    )?;
    let spec = a
        .covariance
        .clone()
        .or(file.covariance)
        .unwrap_or_else(|| "diagonal".into());
    let r = pb.n_causes();
    let covariance = match CovarianceSpec::parse(&spec)? {
        CovarianceSpec::Diagonal => CovarianceModel::diagonal(r, &partition),
        CovarianceSpec::Exchangeable(rho) => CovarianceModel::exchangeable(r, &partition, rho)?,
        CovarianceSpec::File(p) => {
            io::read_covariance(&p, pb.cause_labels(), pb.question_labels(), &partition)?
        }
    };
    let seed = cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let missing = a.missing_rate.or(file.missing_rate).unwrap_or(0.0);
    let demographics = a.demographics || file.demographics.unwrap_or(false);
    let cfg = SimulationConfig::new(n, pb, prior, partition, covariance, seed)
        .with_missing_rate(missing)
        .with_demographics(demographics);
    let data = simulate_dataset(&cfg)?;

    create_dir(&a.out)?;
    io::write_answers(&a.out.join("answers.csv"), &data.answers)?;
    io::write_causes(&a.out.join("causes.csv"), &data.causes, &data.cause_labels)?;
    if let Some(d) = &data.demographics {
        io::write_demographics(&a.out.join("demographics.csv"), d)?;
    }
    println!(
        "simulated {n} interviews (seed {seed}) into {}",
        a.out.display()
    );
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct ScoreRow<'a> {
    level: &'a str,
    label: &'a str,
    value: f64,
}

#[derive(Serialize)]
struct CellRow<'a> {
    interview: usize,
    question: &'a str,
    imputed: f64,
    observed: String,
}

fn score(cli: &Cli, a: &ScoreArgs) -> Result<Outcome> {
    let pb = clamp_probbase(
        &load_probbase(&a.probbase, a.data.letter_codes.as_deref())?,
        cli.eps_clamp,
    );
    let inputs = Inputs::load(&a.data, &pb)?;
    let ctx = inputs.context(&a.data)?.keep_cells(a.cells.is_some());
    let res = ctx.score(&pb)?;
    println!(
        "I_A = {} ({} scored cells, denominator {})",
        io::format_number(res.overall),
        res.scored_cells,
        res.denominator
    );
    if let Some(out) = &a.out {
        let mut rows = vec![
            ScoreRow {
                level: "overall",
                label: "I_A",
                value: res.overall,
            },
            ScoreRow {
                level: "overall",
                label: "total_loss",
                value: res.total_loss,
            },
            ScoreRow {
                level: "overall",
                label: "scored_cells",
                value: res.scored_cells as f64,
            },
        ];
        for (id, &loss) in inputs.partition.block_ids().iter().zip(&res.per_block) {
            rows.push(ScoreRow {
                level: "block",
                label: id,
                value: loss,
            });
        }
        io::write_records(out, &rows)?;
    }
    if let (Some(path), Some(cells)) = (&a.cells, &res.per_cell) {
        let labels = inputs.answers.question_labels();
        let rows: Vec<CellRow> = cells
            .iter()
            .map(|c| CellRow {
                interview: c.row,
                question: &labels[c.question],
                imputed: c.imputed,
                observed: c.observed.to_string(),
            })
            .collect();
        io::write_records(path, &rows)?;
    }
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct MetricRow {
    metric: String,
    value: f64,
}

fn metric_rows(m: &AuditMetrics) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    let mut push = |name: String, v: f64| {
        rows.push(MetricRow {
            metric: name,
            value: v,
        })
    };
    push("n_pos".into(), m.n_pos as f64);
    push("n_zero".into(), m.n_zero as f64);
    push("n_neg".into(), m.n_neg as f64);
    for v in RocVariant::ALL {
        if let Some(r) = m.roc(v) {
            push(format!("auc_{}", v.as_str()), r.auc);
            push(format!("auc_se_{}", v.as_str()), r.se);
        }
    }
    for (name, w) in [
        ("pos_vs_zero", m.wilcoxon_pos_zero),
        ("neg_vs_zero", m.wilcoxon_neg_zero),
        ("pos_vs_neg", m.wilcoxon_pos_neg),
    ] {
        if let Some(w) = w {
            push(format!("wilcoxon_p_{name}"), w.p_value);
            push(
                format!("wilcoxon_log10_p_{name}"),
                w.log_p / std::f64::consts::LN_10,
            );
        }
    }
    push("flagged".into(), m.flagged as f64);
    push("flagged_agree".into(), m.flagged_agree as f64);
    push("flagged_fraction".into(), m.flagged_fraction);
    rows
}

fn audit(cli: &Cli, a: &AuditArgs) -> Result<Outcome> {
    let pb = clamp_probbase(
        &load_probbase(&a.probbase, a.data.letter_codes.as_deref())?,
        cli.eps_clamp,
    );
    let inputs = Inputs::load(&a.data, &pb)?;
    let ctx = inputs.context(&a.data)?;
    let entries = match &a.entries {
        Some(p) => Some(io::read_entries(
            p,
            pb.cause_labels(),
            pb.question_labels(),
        )?),
        None => None,
    };
    let cfg = AuditConfig {
        eps: a.eps,
        clamp: cli.eps_clamp,
        rule: match a.top_fraction {
            Some(f) => ClassRule::TopFraction(f),
            None => ClassRule::Threshold(a.tau),
        },
        mode: match a.mode {
            ModeArg::Full => AuditMode::Full,
            ModeArg::Incremental => AuditMode::Incremental,
        },
        entries,
    };
    let mut report = audit_probbase(&pb, &ctx, &cfg)?;
    if let Some(t) = &a.truth {
        let truth = io::read_truth(t, &pb)?;
        report = report.with_truth(&truth)?;
    }
    io::write_report(&a.out, &report)?;
    let flagged = report
        .entries
        .iter()
        .filter(|e| e.class != Sign::Zero)
        .count();
    println!(
        "audited {} entries; {} flagged; {} one-sided; base I_A = {}",
        report.len(),
        flagged,
        report.one_sided_count(),
        io::format_number(report.base_objective)
    );
    if a.truth.is_some() {
        let m = report.metrics()?;
        if let Some(r) = m.roc(RocVariant::PosVsNeg) {
            println!("AUC(+ vs -) = {:.4} (se {:.4})", r.auc, r.se);
        }
        if let Some(p) = &a.metrics {
            io::write_records(p, &metric_rows(&m))?;
        }
    }
    Ok(Outcome::Ok)
}

fn flagged_entries(report: &Path, pb: &Probbase) -> Result<Vec<(usize, usize)>> {
    let rows = io::read_report(report)?;
    let find = |labels: &[String], l: &str, what: &str| {
        labels
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| anyhow::anyhow!("unknown {what} `{l}` in {}", report.display()))
    };
    rows.iter()
        .filter(|r| r.class != Sign::Zero)
        .map(|r| {
            Ok((
                find(pb.cause_labels(), &r.cause, "cause")?,
                find(pb.question_labels(), &r.question, "question")?,
            ))
        })
        .collect()
}

fn cold_start(answers: &AnswerMatrix, prior: Option<&Path>, seed: u64) -> Result<Probbase> {
    let Some(prior) = prior else {
        bail!(UsageError(
            "a cold start needs --prior to name the causes".into()
        ));
    };
    let prior: Prior = io::read_prior(prior)?;
    let s = answers.n_questions();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..prior.len() * s)
        .map(|_| rng.random_range(0.05..0.95))
        .collect();
    Ok(Probbase::new(
        prior.cause_labels().to_vec(),
        answers.question_labels().to_vec(),
        values,
    )?)
}

fn optimize(cli: &Cli, a: &OptimizeArgs) -> Result<Outcome> {
    let start = match &a.probbase {
        Some(p) => load_probbase(p, a.data.letter_codes.as_deref())?,
        None => {
            let answers = io::read_answers(&a.data.answers)?;
            let seed = cli.seed.unwrap_or(DEFAULT_SEED);
            log::warn!("cold start from a random probbase (seed {seed}); the result is a local optimum near it");
            cold_start(&answers, a.data.prior.as_deref(), seed)?
        }
    };
    let start = clamp_probbase(&start, cli.eps_clamp);
    let inputs = Inputs::load(&a.data, &start)?;
    let ctx = inputs.context(&a.data)?;
    let entries = match (&a.entries, &a.flagged) {
        (Some(p), _) => Some(io::read_entries(
            p,
            start.cause_labels(),
            start.question_labels(),
        )?),
        (None, Some(r)) => Some(flagged_entries(r, &start)?),
        (None, None) => None,
    };
    let cfg = OptimizeConfig {
        entries,
        initial_step: a.initial_step,
        shrink: a.shrink,
        max_sweeps: a.max_sweeps,
        tolerance: a.tolerance,
        eps: a.eps,
        clamp: cli.eps_clamp,
        ..OptimizeConfig::default()
    };
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    let res = descend(&start, &cfg, &ctx)?;
    io::write_probbase(&a.out, &res.probbase)?;
    if let Some(t) = &a.trace {
        io::write_trace(
            t,
            res.initial_objective,
            &res.trace,
            start.cause_labels(),
            start.question_labels(),
        )?;
    }
    println!(
        "I_A {} -> {} in {} accepted steps over {} sweeps ({}; {} optimum)",
        io::format_number(res.initial_objective),
        io::format_number(res.final_objective),
        res.trace.len(),
        res.sweeps,
        if res.converged {
            "converged"
        } else {
            "sweep limit reached"
        },
        res.optimum_kind()
    );
    Ok(Outcome::Ok)
}

fn blocks(a: &BlocksArgs) -> Result<Outcome> {
    let answers = io::read_answers(&a.answers)?;
    let assoc = pairwise_association(&answers)?;
    let linkage = match a.linkage {
        LinkageArg::Average => Linkage::Average,
        LinkageArg::Complete => Linkage::Complete,
    };
    let cut = match (a.n_blocks, a.height) {
        (Some(b), _) => DendrogramCut::blocks(linkage, b),
        (None, Some(h)) => DendrogramCut::height(linkage, h),
        (None, None) => bail!(UsageError("give --blocks or --height".into())),
    };
    let part = learn_partition(&assoc, &cut).map_err(|e| UsageError(e.to_string()))?;
    io::write_partition(&a.out, &part, answers.question_labels())?;
    println!(
        "{} questions in {} blocks",
        part.n_questions(),
        part.n_blocks()
    );
    if let (Some(causes), Some(cov_out)) = (&a.causes, &a.covariance_out) {
        let (labels, causes) = match &a.prior {
            Some(p) => {
                let prior: Prior = io::read_prior(p)?;
                let labels = prior.cause_labels().to_vec();
                let causes = io::read_causes(causes, &labels)?;
                (labels, causes)
            }
            None => io::read_causes_unlabelled(causes)?,
        };
        let est = estimate_block_covariances(&answers, &causes, labels.len(), &part)?;
        for &(j, l) in &est.pooled {
            log::warn!(
                "cause {} block {} uses the pooled matrix",
                labels[j],
                part.block_ids()[l]
            );
        }
        io::write_covariance(
            cov_out,
            &est.model,
            &labels,
            answers.question_labels(),
            &part,
        )?;
    }
    Ok(Outcome::Ok)
}

fn roc(a: &RocArgs) -> Result<Outcome> {
    let rows = io::read_report(&a.report)?;
    if rows.iter().any(|r| r.truth.is_none()) {
        bail!("report {} has no truth column values", a.report.display());
    }
    let v: RocVariant = a.variant.into();
    let (scores, labels) = roc_inputs(rows.iter().map(|r| (r.gamma, r.truth)), v);
    let points = roc_curve(&scores, &labels)?;
    io::write_roc(&a.out, &points)?;
    let auc = roc_auc(&scores, &labels)?;
    println!("AUC({}) = {:.4} (se {:.4})", v.as_str(), auc.auc, auc.se);
    Ok(Outcome::Ok)
}

fn experiment(cli: &Cli, a: &ExperimentArgs) -> Result<Outcome> {
    let mut cfg = load_experiment(a.config.as_deref(), a.scenario.map(Into::into))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = a.n {
        cfg.n = n;
    }
    if let Some(runs) = a.runs {
        cfg.runs = runs;
    }
    cfg.clamp = cli.eps_clamp;
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    create_dir(&a.out)?;
    let outcome = run_experiment(&cfg, &a.out)?;
    print!("{}", outcome.summary);
    Ok(if outcome.passed() {
        Outcome::Ok
    } else {
        Outcome::BandFailure
    })
}
