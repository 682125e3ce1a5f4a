use vaimpute::model::{BlockPartition, Probbase};
use vaimpute::simulate::{simulate_dataset, CovarianceModel, SimulationConfig};
use vaimpute::{Answer, Prior};

fn config(n: usize, seed: u64) -> SimulationConfig {
    let pb = Probbase::unlabelled(3, 6, (0..18).map(|i| 0.1 + 0.04 * i as f64).collect()).unwrap();
    let prior = Prior::unlabelled(vec![0.6, 0.3, 0.1]).unwrap();
    let part = BlockPartition::contiguous(6, 2).unwrap();
    let cov = CovarianceModel::exchangeable(3, &part, 0.7).unwrap();
    SimulationConfig::new(n, pb, prior, part, cov, seed)
}

#[test]
fn same_seed_same_data() {
    let a = simulate_dataset(&config(500, 3)).unwrap();
    let b = simulate_dataset(&config(500, 3)).unwrap();
    assert_eq!(a.answers, b.answers);
    assert_eq!(a.causes, b.causes);
    let c = simulate_dataset(&config(500, 4)).unwrap();
    assert_ne!(a.answers, c.answers);
}

#[test]
fn prefix_rows_do_not_depend_on_n() {
    let small = simulate_dataset(&config(100, 8)).unwrap();
    let large = simulate_dataset(&config(400, 8)).unwrap();
    for i in 0..100 {
        assert_eq!(small.answers.row(i), large.answers.row(i));
        assert_eq!(small.causes[i], large.causes[i]);
    }
}

#[test]
fn missing_rate_and_cause_shares() {
    let n = 20_000;
    let data = simulate_dataset(&config(n, 5).with_missing_rate(0.2)).unwrap();
    let missing = data
        .answers
        .as_flat()
        .iter()
        .filter(|&&a| a == Answer::Missing)
        .count() as f64;
    let cells = (n * 6) as f64;
    assert!((missing / cells - 0.2).abs() < 4.0 * (0.2 * 0.8 / cells).sqrt());
    let counts = data.cause_counts();
    for (j, p) in [0.6, 0.3, 0.1].into_iter().enumerate() {
        let share = counts[j] as f64 / n as f64;
        assert!(
            (share - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt(),
            "cause {j}: {share}"
        );
    }
}

#[test]
fn demographics_are_optional() {
    assert!(simulate_dataset(&config(50, 1))
        .unwrap()
        .demographics
        .is_none());
    let d = simulate_dataset(&config(50, 1).with_demographics(true))
        .unwrap()
        .demographics
        .unwrap();
    assert_eq!(d.len(), 50);
}

#[test]
fn within_block_answers_are_positively_correlated() {
    let data = simulate_dataset(&config(20_000, 6)).unwrap();
    let rows: Vec<usize> = (0..data.causes.len())
        .filter(|&i| data.causes[i] == 0)
        .collect();
    let yes = |i: usize, k: usize| f64::from(u8::from(data.answers.get(i, k).is_yes()));
    let n = rows.len() as f64;
    let corr = |a: usize, b: usize| {
        let (ma, mb) = (
            rows.iter().map(|&i| yes(i, a)).sum::<f64>() / n,
            rows.iter().map(|&i| yes(i, b)).sum::<f64>() / n,
        );
        let c = rows
            .iter()
            .map(|&i| (yes(i, a) - ma) * (yes(i, b) - mb))
            .sum::<f64>()
            / n;
        c / (ma * (1.0 - ma) * mb * (1.0 - mb)).sqrt()
    };
    assert!(corr(0, 1) > 0.3);
    assert!(corr(0, 4).abs() < 4.0 / n.sqrt());
}

#[test]
fn invalid_settings_are_rejected() {
    assert!(simulate_dataset(&config(10, 1).with_missing_rate(1.0)).is_err());
    assert!(simulate_dataset(&config(0, 1)).is_err());
}
