//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vaimpute::audit::{audit_probbase, AuditConfig, AuditMode, ClassRule};
use vaimpute::experiments::{
    lemma1_check, run_experiment, run_resample_q4, run_signed_offset_audit, run_table1,
    theorem1_check, tiny_instance, ExperimentConfig, Scenario,
};
use vaimpute::io;
use vaimpute::model::{BlockPartition, Probbase};
use vaimpute::optimize::{descend, OptimizeConfig};
use vaimpute::simulate::{
    exact_tiny_distribution, simulate_dataset, CovarianceModel, SimulationConfig,
};
use vaimpute::{Algorithm, Answer, AnswerMatrix, Prior, ScoringContext};

type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Verdict + 'a>);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn table1_ordering() -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for n in [1500, 10_000] {
        let mut cfg = ExperimentConfig::new(Scenario::Table1);
        cfg.n = n;
        let start = Instant::now();
        let res = run_table1(&cfg).unwrap();
        let per_run = start.elapsed().as_secs_f64() / res.runs.len() as f64;
        let ordered = res.runs.iter().filter(|r| r.ordered).count();
        let ratio = res.min_ratio_when_ordered().unwrap_or(f64::NAN);
        pass &= res.runs.len() == 100 && ordered >= 95 && ratio >= 3.0 && per_run <= 300.0;
        detail.push(format!(
            "n={n}: ordered {ordered}/100, min ratio {ratio:.2}, {per_run:.2}s/run"
        ));
    }
    verdict(pass, detail.join("; "))
}

fn resample_detection() -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for (n, min) in [(1500, 0.75), (10_000, 0.85)] {
        let mut cfg = ExperimentConfig::new(Scenario::ResampleQ4);
        cfg.n = n;
        let rate = run_resample_q4(&cfg, 50).unwrap().detection_rate();
        pass &= rate >= min;
        detail.push(format!("n={n}: {rate:.2} (need {min})"));
    }
    verdict(pass, detail.join("; "))
}

fn signed_offset() -> vaimpute::experiments::SignedOffsetResult {
    run_signed_offset_audit(&ExperimentConfig::new(Scenario::SignedOffsetAudit)).unwrap()
}

fn signed_offset_auc(res: &vaimpute::experiments::SignedOffsetResult) -> Verdict {
    use vaimpute::audit::RocVariant::*;
    let m = &res.metrics;
    let auc = |v| res.auc(v).unwrap_or(f64::NAN);
    let (pn, pz, nz) = (auc(PosVsNeg), auc(PosVsZero), auc(NegVsZero));
    let log10 = |w: Option<vaimpute::audit::WilcoxonTest>| {
        w.map_or(f64::NAN, |w| w.log_p / std::f64::consts::LN_10)
    };
    let (wp, wn) = (log10(m.wilcoxon_pos_zero), log10(m.wilcoxon_neg_zero));
    let pass = (0.70..=0.95).contains(&pn) && pz >= 0.65 && nz >= 0.65 && wp < -10.0 && wn < -10.0;
    verdict(
        pass,
        format!(
            "AUC(+,-) {pn:.3}, AUC(+,0) {pz:.3}, AUC(-,0) {nz:.3}, log10 p(+,0) {wp:.1}, log10 p(-,0) {wn:.1} \
             over {} +, {} zero, {} -",
            m.n_pos, m.n_zero, m.n_neg
        ),
    )
}

fn high_confidence_flags(res: &vaimpute::experiments::SignedOffsetResult) -> Verdict {
    let tau = if res.tau_flagged > 0 {
        Some(res.tau_agreement())
    } else {
        None
    };
    let share = res.share_agreement();
    let pass = tau.map_or(share >= 0.95, |t| t >= 0.95 || share >= 0.95);
    let tau_text = match tau {
        Some(t) => format!(
            "|gamma|>{}: {}/{} agree ({t:.3})",
            res.tau, res.tau_agree, res.tau_flagged
        ),
        None => format!("|gamma|>{} flags none", res.tau),
    };
    verdict(
        pass,
        format!(
            "{tau_text}; top {:.1}%: {}/{} agree ({share:.3})",
            100.0 * res.flag_share,
            res.share_agree,
            res.share_flagged
        ),
    )
}

fn lemma1() -> Verdict {
    let res = lemma1_check(&ExperimentConfig::new(Scenario::Lemma1Check)).unwrap();
    let (z, ratio) = (res.z_score(), res.rms_ratio());
    verdict(
        z.abs() <= 3.0 && ratio <= 0.6,
        format!(
            "|mean - exact| = {:.2} SE over {} datasets, RMS ratio {ratio:.3}",
            z.abs(),
            res.small.repeats
        ),
    )
}

fn theorem1() -> Verdict {
    let res = theorem1_check(&ExperimentConfig::new(Scenario::Theorem1Check)).unwrap();
    verdict(
        res.trials.len() == 100 && res.violations() == 0,
        format!(
            "{} violations in {} perturbations, min gap {:.2e}",
            res.violations(),
            res.trials.len(),
            res.min_gap()
        ),
    )
}

fn simulator_fidelity() -> Verdict {
    let (r, s) = (5, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let values = (0..r * s).map(|_| rng.random_range(0.1..0.9)).collect();
    let pb = Probbase::unlabelled(r, s, values).unwrap();
    let prior = Prior::unlabelled(vec![0.2; r]).unwrap();
    let part = BlockPartition::contiguous(s, 4).unwrap();
    let cov = CovarianceModel::exchangeable(r, &part, 0.5).unwrap();
    let data = simulate_dataset(&SimulationConfig::new(
        10_000,
        pb.clone(),
        prior,
        part.clone(),
        cov,
        71,
    ))
    .unwrap();
    let mut rows = vec![Vec::new(); r];
    for (i, &j) in data.causes.iter().enumerate() {
        rows[j].push(i);
    }
    let yes = |i: usize, k: usize| {
        if data.answers.get(i, k).is_yes() {
            1.0
        } else {
            0.0
        }
    };
    let (mut within, mut cells) = (0, 0);
    let (mut corr_ok, mut pairs, mut worst) = (0, 0, 0.0f64);
    for (j, idx) in rows.iter().enumerate() {
        let nj = idx.len() as f64;
        let mean: Vec<f64> = (0..s)
            .map(|k| idx.iter().map(|&i| yes(i, k)).sum::<f64>() / nj)
            .collect();
        for (k, m) in mean.iter().enumerate() {
            let q = pb.get(j, k);
            cells += 1;
            if (m - q).abs() <= 3.0 * (q * (1.0 - q) / nj).sqrt() {
                within += 1;
            }
        }
        for a in 0..s {
            for b in a + 1..s {
                if part.block_of(a) == part.block_of(b) {
                    continue;
                }
                let cov: f64 = idx
                    .iter()
                    .map(|&i| (yes(i, a) - mean[a]) * (yes(i, b) - mean[b]))
                    .sum::<f64>()
                    / nj;
                let rho = cov / (mean[a] * (1.0 - mean[a]) * mean[b] * (1.0 - mean[b])).sqrt();
                pairs += 1;
                worst = worst.max(rho.abs() * nj.sqrt());
                if rho.abs() <= 4.0 / nj.sqrt() {
                    corr_ok += 1;
                }
            }
        }
    }
    let share = within as f64 / cells as f64;
    verdict(
        share >= 0.99 && corr_ok == pairs,
        format!(
            "{within}/{cells} cells within 3 SE; {corr_ok}/{pairs} cross-block correlations within 4/sqrt(n_j) \
             (worst {worst:.2}/sqrt(n_j))"
        ),
    )
}

fn optimizer_recovery() -> Verdict {
    let inst = tiny_instance().unwrap();
    let part = BlockPartition::singletons(4);
    let cov = CovarianceModel::diagonal(2, &part);
    let dist = exact_tiny_distribution(&inst.probbase, &inst.prior, &part, &cov, 0.0).unwrap();
    let alg = Algorithm::NaiveBayes;
    let ctx = ScoringContext::new(&dist.patterns, &inst.prior, &part, &alg)
        .unwrap()
        .with_weights(&dist.marginal)
        .unwrap();
    let (j, k) = (0, 0);
    let truth = inst.probbase.get(j, k);
    let start = inst.probbase.with_entry(j, k, truth + 0.2).unwrap();
    let cfg = OptimizeConfig {
        max_sweeps: 200,
        ..OptimizeConfig::default()
    };
    let res = descend(&start, &cfg, &ctx).unwrap();
    let got = res.probbase.get(j, k);
    let mut objectives = vec![res.initial_objective];
    objectives.extend(res.trace.iter().map(|t| t.objective));
    let decreasing = objectives.windows(2).all(|w| w[1] < w[0]);
    verdict(
        (got - truth).abs() <= 0.05 && decreasing && !res.trace.is_empty(),
        format!(
            "entry {truth} offset to {:.1} returned at {got:.4}; {} accepted steps in {} sweeps, strictly decreasing: \
             {decreasing}",
            truth + 0.2,
            res.trace.len(),
            res.sweeps
        ),
    )
}

fn files_under(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn outputs_with_threads(threads: usize, root: &Path) -> Vec<(String, Vec<u8>)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    let dir = root.join(format!("threads{threads}"));
    pool.install(|| {
        let mut files = Vec::new();
        for scenario in [
            Scenario::Table1,
            Scenario::SignedOffsetAudit,
            Scenario::Lemma1Check,
        ] {
            let mut cfg = ExperimentConfig::new(scenario);
            cfg.runs = cfg.runs.min(3);
            cfg.repeats = 100;
            let out = dir.join(scenario.as_str());
            run_experiment(&cfg, &out).unwrap();
            files.extend(files_under(&out));
        }
        let inst = tiny_instance().unwrap();
        let sim = SimulationConfig::new(
            2000,
            inst.probbase.clone(),
            inst.prior.clone(),
            inst.partition.clone(),
            inst.covariance.clone(),
            5,
        )
        .with_missing_rate(0.1)
        .with_demographics(true);
        let data = simulate_dataset(&sim).unwrap();
        let alg = Algorithm::InterVa4;
        let ctx = ScoringContext::new(&data.answers, &inst.prior, &inst.partition, &alg).unwrap();
        let cfg = AuditConfig {
            eps: 0.01,
            clamp: vaimpute::DEFAULT_CLAMP,
            rule: ClassRule::TopFraction(0.25),
            mode: AuditMode::Full,
            entries: None,
        };
        let report = audit_probbase(&inst.probbase, &ctx, &cfg).unwrap();
        io::write_answers(&dir.join("answers.csv"), &data.answers).unwrap();
        io::write_report(&dir.join("report.csv"), &report).unwrap();
        files.push((
            "answers.csv".into(),
            fs::read(dir.join("answers.csv")).unwrap(),
        ));
        files.push((
            "report.csv".into(),
            fs::read(dir.join("report.csv")).unwrap(),
        ));
        files
    })
}

fn random_value(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..6) {
        0 => 0.0,
        1 => 1.0,
        2 => rng.random_range(0.0..1e-6),
        3 => 1.0 - rng.random_range(0.0..1e-9),
        _ => rng.random(),
    }
}

fn random_labels(rng: &mut ChaCha8Rng, prefix: &str, n: usize) -> Vec<String> {
    let tag: u32 = rng.random();
    (0..n).map(|i| format!("{prefix} {tag:x}_{i}")).collect()
}

/// Writes then reads one random probbase, answer matrix, prior and partition.
fn round_trip_once(rng: &mut ChaCha8Rng, dir: &Path) -> Result<(), String> {
    let (r, s) = (rng.random_range(1..8), rng.random_range(1..12));
    let causes = random_labels(rng, "cause", r);
    let questions = random_labels(rng, "q", s);
    let pb = Probbase::new(
        causes.clone(),
        questions.clone(),
        (0..r * s).map(|_| random_value(rng)).collect(),
    )
    .map_err(|e| e.to_string())?;
    let n = rng.random_range(1..20);
    let cells = (0..n * s)
        .map(|_| match rng.random_range(0..3) {
            0 => Answer::No,
            1 => Answer::Yes,
            _ => Answer::Missing,
        })
        .collect();
    let answers = AnswerMatrix::from_flat(questions.clone(), cells).map_err(|e| e.to_string())?;
    let weights: Vec<f64> = (0..r).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let prior = Prior::new(causes, weights.iter().map(|w| w / total).collect())
        .map_err(|e| e.to_string())?;
    let nb = rng.random_range(1..=s);
    let mut assign: Vec<usize> = (0..s).map(|k| k % nb).collect();
    for k in (1..s).rev() {
        assign.swap(k, rng.random_range(0..=k));
    }
    let part = BlockPartition::from_assignment(&assign).map_err(|e| e.to_string())?;

    let path = dir.join("pb.csv");
    io::write_probbase(&path, &pb).map_err(|e| e.to_string())?;
    let back: Probbase<f64> = io::read_probbase(&path).map_err(|e| e.to_string())?;
    if back != pb {
        return Err("probbase differs".into());
    }
    let path = dir.join("answers.csv");
    io::write_answers(&path, &answers).map_err(|e| e.to_string())?;
    if io::read_answers(&path).map_err(|e| e.to_string())? != answers {
        return Err("answers differ".into());
    }
    let path = dir.join("prior.csv");
    io::write_prior(&path, &prior).map_err(|e| e.to_string())?;
    let back: Prior = io::read_prior(&path).map_err(|e| e.to_string())?;
    if back != prior {
        return Err("prior differs".into());
    }
    let path = dir.join("partition.csv");
    io::write_partition(&path, &part, &questions).map_err(|e| e.to_string())?;
    let back = io::read_partition(&path, &questions).map_err(|e| e.to_string())?;
    if back.canonical() != part.canonical() {
        return Err("partition differs".into());
    }
    Ok(())
}

fn determinism_and_round_trip() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let one = outputs_with_threads(1, dir.path());
    let four = outputs_with_threads(4, dir.path());
    let identical = one == four;
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let failures: Vec<String> = (0..1000)
        .filter_map(|i| {
            round_trip_once(&mut rng, dir.path())
                .err()
                .map(|e| format!("file set {i}: {e}"))
        })
        .collect();
    verdict(
        identical && failures.is_empty(),
        format!(
            "{} output files byte-identical with 1 and 4 threads: {identical}; {} of 1000 random file sets failed the \
             round trip{}",
            one.len(),
            failures.len(),
            failures.first().map(|f| format!(" ({f})")).unwrap_or_default()
        ),
    )
}

fn main() -> ExitCode {
    let signed = signed_offset();
    let criteria: Vec<Criterion> = vec![
        ("1 table ordering", Box::new(table1_ordering)),
        ("2 resampling detection", Box::new(resample_detection)),
        (
            "3 signed-offset AUC",
            Box::new(|| signed_offset_auc(&signed)),
        ),
        (
            "4 high-confidence flags",
            Box::new(|| high_confidence_flags(&signed)),
        ),
        ("5 unbiased objective", Box::new(lemma1)),
        ("6 truth minimizes", Box::new(theorem1)),
        ("7 simulator fidelity", Box::new(simulator_fidelity)),
        ("8 optimizer recovery", Box::new(optimizer_recovery)),
        (
            "9 determinism and round trip",
            Box::new(determinism_and_round_trip),
        ),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let v = check();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {name}: {status} ({}; {:.1}s)",
            v.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!v.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
