use std::fs;

use proptest::prelude::*;
use sample_transfer::harness::{
    emit_csv, emit_plot_data, mean, read_csv, run_experiment, run_experiment_with, sample_std, sweep_tau, Algorithm,
    ExperimentConfig, FqiSettings, NoiseSetting, AGGREGATE_FILE,
};
use sample_transfer::EvalConfig;

fn small(algorithms: Vec<Algorithm>, schedule: Vec<usize>, runs: usize) -> ExperimentConfig {
    ExperimentConfig {
        task_set: 2,
        algorithms,
        schedule,
        runs,
        seed: 17,
        training_size: 300,
        caps: Some(vec![200; 4]),
        fqi: FqiSettings {
            iterations: 4,
            gamma: 0.9,
        },
        eval: EvalConfig {
            episodes: 5,
            horizon: 30,
            start: 0.0,
        },
        ..Default::default()
    }
}

#[test]
fn csv_files_round_trip() {
    let rt = run_experiment(&small(Algorithm::ALL.to_vec(), vec![20, 60], 2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let first = emit_csv(&rt, dir.path()).unwrap();
    let back = read_csv(dir.path()).unwrap();
    assert_eq!(back.len(), rt.len());
    for (a, b) in rt.rows.iter().zip(&back.rows) {
        assert_eq!((a.algorithm, a.budget, a.run_id, a.seed), (b.algorithm, b.budget, b.run_id, b.seed));
        assert!((a.performance - b.performance).abs() <= 1e-8 * a.performance.abs().max(1e-300));
        assert_eq!(a.iterations.len(), b.iterations.len());
    }
    let other = tempfile::tempdir().unwrap();
    emit_csv(&back, other.path()).unwrap();
    for path in first {
        let name = path.file_name().unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(other.path().join(name)).unwrap());
    }
}

#[test]
fn aggregate_file_matches_raw_rows() {
    let rt = run_experiment(&small(vec![Algorithm::SingleTask, Algorithm::Bat], vec![30, 90], 5)).unwrap();
    for row in rt.aggregate() {
        let perf = rt.performances(row.algorithm, row.budget);
        assert_eq!(row.runs, 5);
        assert!((row.mean - mean(&perf)).abs() <= 1e-12);
        assert!((row.std - sample_std(&perf)).abs() <= 1e-12);
    }

    let dir = tempfile::tempdir().unwrap();
    emit_csv(&rt, dir.path()).unwrap();
    let back = read_csv(dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join(AGGREGATE_FILE)).unwrap();
    for (line, agg) in text.lines().skip(1).zip(back.aggregate()) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], agg.algorithm.name());
        let (m, s): (f64, f64) = (f[4].parse().unwrap(), f[5].parse().unwrap());
        assert!((m - agg.mean).abs() <= 1e-8 * agg.mean.abs().max(1.0));
        assert!((s - agg.std).abs() <= 1e-8 * agg.std.abs().max(1.0));
    }
}

#[test]
fn thread_count_does_not_change_rows() {
    let cfg = small(vec![Algorithm::Ast, Algorithm::Btt, Algorithm::SingleTask], vec![25, 50], 3);
    let serial = run_experiment_with(&cfg, Some(1)).unwrap();
    let parallel = run_experiment_with(&cfg, Some(4)).unwrap();
    assert_eq!(format!("{serial:?}"), format!("{parallel:?}"));
}

#[test]
fn tau_sweep_shares_seeds_across_tau() {
    let cfg = small(vec![Algorithm::Btt], vec![40], 2);
    let rt = sweep_tau(&cfg, &[0.25, 0.75], None).unwrap();
    assert_eq!(rt.len(), 4);
    let seeds = |tau: f64| rt.rows.iter().filter(|r| r.tau == tau).map(|r| r.seed).collect::<Vec<_>>();
    assert_eq!(seeds(0.25), seeds(0.75));
    assert!(sweep_tau(&cfg, &[], None).is_err());
}

#[test]
fn plot_data_is_deterministic() {
    let cfg = small(vec![Algorithm::Bat], vec![20, 40], 2);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        emit_plot_data(&run_experiment(&cfg).unwrap(), dir.path()).unwrap();
    }
    for entry in fs::read_dir(a.path()).unwrap() {
        let path = entry.unwrap().path();
        assert_eq!(fs::read(&path).unwrap(), fs::read(b.path().join(path.file_name().unwrap())).unwrap());
    }
}

#[test]
fn more_training_samples_help_bat_at_small_budgets() {
    let means: Vec<f64> = [1000, 5000, 10_000]
        .iter()
        .map(|&l| {
            let cfg = ExperimentConfig {
                task_set: 1,
                algorithms: vec![Algorithm::Bat],
                schedule: vec![100],
                runs: 20,
                training_size: l,
                ..Default::default()
            };
            mean(&run_experiment(&cfg).unwrap().performances(Algorithm::Bat, 100))
        })
        .collect();
    assert!(means.windows(2).all(|w| w[0] <= w[1]), "{means:?}");
}

fn algorithms() -> impl Strategy<Value = Vec<Algorithm>> {
    prop::sample::subsequence(Algorithm::ALL.to_vec(), 1..=5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_survives_serialization(
        task_set in 1u8..=2,
        algorithms in algorithms(),
        start in 1usize..500,
        steps in prop::collection::vec(1usize..5000, 0..4),
        runs in 1usize..100,
        seed in any::<u64>(),
        tau in 0.0f64..2.0,
        gamma in 0.5f64..0.99,
        independent in any::<bool>(),
        caps in prop::option::of(prop::collection::vec(1usize..10_000, 4)),
    ) {
        let mut schedule = vec![start];
        for s in steps {
            schedule.push(schedule.last().unwrap() + s);
        }
        let cfg = ExperimentConfig {
            task_set,
            algorithms,
            schedule,
            runs,
            seed,
            tau,
            caps,
            next_state_noise: if independent { NoiseSetting::Independent } else { NoiseSetting::Shared },
            fqi: FqiSettings { iterations: 13, gamma },
            ..Default::default()
        };
        prop_assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
