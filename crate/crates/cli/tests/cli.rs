use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vaimpute(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vaimpute"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn fixture(dir: &Path) {
    let values = [
        [0.7, 0.2, 0.5, 0.1, 0.6, 0.3],
        [0.2, 0.8, 0.4, 0.6, 0.1, 0.5],
        [0.5, 0.5, 0.9, 0.3, 0.3, 0.7],
    ];
    let mut pb = String::from("cause,q0,q1,q2,q3,q4,q5\n");
    for (j, row) in values.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        pb.push_str(&format!("c{j},{}\n", cells.join(",")));
    }
    fs::write(dir.join("pb.csv"), pb).unwrap();
    fs::write(
        dir.join("prior.csv"),
        "cause,prior\nc0,0.5\nc1,0.3\nc2,0.2\n",
    )
    .unwrap();
    fs::write(
        dir.join("part.csv"),
        "question,block\nq0,a\nq1,a\nq2,b\nq3,b\nq4,c\nq5,c\n",
    )
    .unwrap();
    let out = vaimpute(
        &[
            "simulate",
            "--probbase",
            "pb.csv",
            "--prior",
            "prior.csv",
            "--partition",
            "part.csv",
            "--covariance",
            "exchangeable:0.3",
            "-n",
            "300",
            "--seed",
            "9",
            "--out",
            "sim",
        ],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

const DATA: [&str; 8] = [
    "--probbase",
    "pb.csv",
    "--answers",
    "sim/answers.csv",
    "--prior",
    "prior.csv",
    "--partition",
    "part.csv",
];

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&vaimpute(&["--help"], dir.path())), 0);
    let v = vaimpute(&["--version"], dir.path());
    assert_eq!(code(&v), 0);
    assert!(String::from_utf8_lossy(&v.stdout).contains("file format"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&vaimpute(&["score", "--answers", "a.csv"], dir.path())),
        1
    );
    assert_eq!(code(&vaimpute(&["frobnicate"], dir.path())), 1);
    let out = vaimpute(&["simulate", "-n", "10", "--out", "x"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("probbase"));
    let out = vaimpute(
        &[
            "--eps-clamp",
            "0.7",
            "experiment",
            "--scenario",
            "table1",
            "--out",
            "x",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn missing_file_exits_two_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = vaimpute(
        &["score", "--probbase", "nowhere.csv", "--answers", "a.csv"],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nowhere.csv"), "{}", stderr(&out));
}

#[test]
fn malformed_csv_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    fs::write(dir.path().join("pb.csv"), "cause,q0\nc0,abc\n").unwrap();
    let out = vaimpute(&[&["score"], &DATA[..]].concat(), dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("pb.csv"), "{}", stderr(&out));
}

#[test]
fn band_failure_exits_three_and_keeps_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = vaimpute(
        &[
            "experiment",
            "--scenario",
            "signed-offset-audit",
            "-n",
            "20",
            "--runs",
            "1",
            "--out",
            "exp",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let summary = fs::read_to_string(dir.path().join("exp/summary.txt")).unwrap();
    assert!(summary.contains("[FAIL]"));
    assert!(summary.contains("overall: FAIL"));
}

#[test]
fn experiment_config_file_is_merged() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("exp.toml"),
        "scenario = \"table1\"\nn = 30\nruns = 2\n\n[scale]\nquestions = 24\n",
    )
    .unwrap();
    let out = vaimpute(
        &["experiment", "--config", "exp.toml", "--out", "exp"],
        dir.path(),
    );
    assert!(matches!(code(&out), 0 | 3), "{}", stderr(&out));
    let summary = fs::read_to_string(dir.path().join("exp/summary.txt")).unwrap();
    assert!(summary.contains("questions: 24"), "{summary}");
    assert!(summary.contains("runs: 2"), "{summary}");

    fs::write(
        dir.path().join("bad.toml"),
        "scenario = \"table1\"\nnonsense = 1\n",
    )
    .unwrap();
    let out = vaimpute(
        &["experiment", "--config", "bad.toml", "--out", "exp"],
        dir.path(),
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn score_audit_roc_optimize_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d);
    let out = vaimpute(
        &[
            &["score"],
            &DATA[..],
            &["--out", "score.csv", "--cells", "cells.csv"],
        ]
        .concat(),
        d,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let score = fs::read_to_string(d.join("score.csv")).unwrap();
    assert!(score.starts_with("level,label,value\noverall,I_A,"));
    assert_eq!(score.lines().filter(|l| l.starts_with("block,")).count(), 3);
    assert_eq!(
        fs::read_to_string(d.join("cells.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + 300 * 6
    );

    // Truth marks the first two entries as overstated and understated.
    let mut truth = String::from("cause,q0,q1,q2,q3,q4,q5\n");
    truth.push_str("c0,+,-,0,0,0,0\nc1,0,0,0,0,0,0\nc2,0,0,0,0,0,0\n");
    fs::write(d.join("truth.csv"), truth).unwrap();
    let out = vaimpute(
        &[
            &["audit"],
            &DATA[..],
            &[
                "--top-fraction",
                "0.25",
                "--truth",
                "truth.csv",
                "--out",
                "report.csv",
                "--metrics",
                "m.csv",
            ],
        ]
        .concat(),
        d,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = fs::read_to_string(d.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 18);
    assert!(fs::read_to_string(d.join("m.csv"))
        .unwrap()
        .starts_with("metric,value\n"));

    let out = vaimpute(&["roc", "--report", "report.csv", "--out", "roc.csv"], d);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("AUC"));

    let out = vaimpute(
        &[
            &["optimize"],
            &DATA[..],
            &[
                "--flagged",
                "report.csv",
                "--out",
                "opt.csv",
                "--trace",
                "trace.csv",
            ],
        ]
        .concat(),
        d,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let trace = fs::read_to_string(d.join("trace.csv")).unwrap();
    let objectives: Vec<f64> = trace
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(objectives.windows(2).all(|w| w[1] < w[0]));
    assert!(String::from_utf8_lossy(&out.stdout).contains("local"));
}

#[test]
fn blocks_writes_partition_and_covariances() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d);
    let out = vaimpute(
        &[
            "blocks",
            "--answers",
            "sim/answers.csv",
            "-b",
            "3",
            "--causes",
            "sim/causes.csv",
            "--prior",
            "prior.csv",
            "--covariance-out",
            "cov.csv",
            "--out",
            "blocks.csv",
        ],
        d,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        fs::read_to_string(d.join("blocks.csv"))
            .unwrap()
            .lines()
            .count(),
        7
    );
    assert!(fs::read_to_string(d.join("cov.csv"))
        .unwrap()
        .starts_with("cause,block,row,col,value\n"));

    let out = vaimpute(
        &[
            "blocks",
            "--answers",
            "sim/answers.csv",
            "-b",
            "3",
            "--height",
            "0.5",
            "--out",
            "x",
        ],
        d,
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d);
    let mut files = Vec::new();
    for threads in ["1", "4"] {
        let sim = format!("sim{threads}");
        let report = format!("report{threads}.csv");
        let opt = format!("opt{threads}.csv");
        let exp = format!("exp{threads}");
        let base = ["--threads", threads, "--seed", "5"];
        let runs = [
            vec![
                "simulate",
                "--probbase",
                "pb.csv",
                "--prior",
                "prior.csv",
                "--partition",
                "part.csv",
            ]
            .into_iter()
            .chain([
                "--covariance",
                "exchangeable:0.2",
                "-n",
                "200",
                "--out",
                &sim,
            ])
            .collect::<Vec<_>>(),
            [&["audit"], &DATA[..], &["--out", &report]].concat(),
            [
                &["optimize"],
                &DATA[..],
                &["--max-sweeps", "2", "--out", &opt],
            ]
            .concat(),
            vec![
                "experiment",
                "--scenario",
                "table1",
                "-n",
                "40",
                "--runs",
                "3",
                "--out",
                &exp,
            ],
        ];
        for args in runs {
            let out = vaimpute(&[&base[..], &args[..]].concat(), d);
            assert!(matches!(code(&out), 0 | 3), "{args:?}: {}", stderr(&out));
        }
        files.push([
            fs::read(d.join(&sim).join("answers.csv")).unwrap(),
            fs::read(d.join(&sim).join("causes.csv")).unwrap(),
            fs::read(d.join(&report)).unwrap(),
            fs::read(d.join(&opt)).unwrap(),
            fs::read(d.join(&exp).join("table1.csv")).unwrap(),
        ]);
    }
    assert!(files[0] == files[1]);
}
