use std::fs;

use bql_core::harness::*;
use bql_core::tabular::{BqlConfig, IqlConfig};
use bql_core::{Error, RunRecord};

fn small(learner: LearnerSpec, games: usize, seeds: usize) -> ExperimentConfig {
    ExperimentConfig {
        n_games: games,
        n_seeds: seeds,
        master_seed: 11,
        ..ExperimentConfig::new(
            learner,
            EnvSpec::Random {
                n_agents: 2,
                n_states: 4,
                n_actions: 2,
                gamma: 0.9,
            },
        )
    }
}

fn bql() -> LearnerSpec {
    LearnerSpec::Bql(BqlConfig {
        total_steps: 3000,
        buffer_capacity: 500,
        ..BqlConfig::default()
    })
}

fn iql() -> LearnerSpec {
    LearnerSpec::Iql(IqlConfig {
        total_steps: 3000,
        eval_every: 500,
        ..IqlConfig::default()
    })
}

fn read_tree(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn reruns_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(bql(), 2, 2);
    cfg.output = dir.path().display().to_string();
    run_experiment(&cfg).unwrap();
    let first = read_tree(dir.path());
    run_experiment(&cfg).unwrap();
    let second = read_tree(dir.path());
    assert!(first.iter().any(|(n, _)| n == "aggregate.csv"));
    assert_eq!(first.iter().filter(|(n, _)| n.starts_with("runs")).count(), 4);
    assert!(first == second, "rerun changed output bytes");
}

#[test]
fn single_cell_aggregate_is_the_run() {
    let cfg = small(iql(), 1, 1);
    let report = run_experiment_in_memory(&cfg).unwrap();
    let env = cfg.build_env(0).unwrap();
    let run = run_single(&cfg.learner, &env, cfg.neural_horizon, cfg.run_seed(0, 0)).unwrap();
    let norms: Vec<f64> = run.points.iter().map(|p| p.normalized_return).collect();
    assert_eq!(report.mean, norms);
    assert!(report.std.iter().all(|s| *s == 0.0));
}

#[test]
fn aggregate_bounds_and_normalization() {
    let report = run_experiment_in_memory(&small(bql(), 3, 2)).unwrap();
    assert_eq!(report.runs.len(), 6);
    for i in 0..report.steps.len() {
        assert!(report.min[i] <= report.mean[i] + 1e-12 && report.mean[i] <= report.max[i] + 1e-12);
        assert!(report.max[i] <= 1.0 + 1e-6);
    }
    let finals: Vec<Vec<u8>> = report.runs.iter().map(|r| r.to_csv_string().unwrap().into_bytes()).collect();
    for i in 0..finals.len() {
        for j in i + 1..finals.len() {
            assert_ne!(finals[i], finals[j]);
        }
    }
}

fn run_with(learner: &str, seed: u64, values: &[f64]) -> RunRecord {
    let mut r = RunRecord::new(learner, seed);
    for (k, v) in values.iter().enumerate() {
        r.push(100 * (k as u64 + 1), 10.0 * v, *v);
    }
    r
}

#[test]
fn report_merges_by_learner_and_step() {
    let dir = tempfile::tempdir().unwrap();
    let finals = [0.2, 0.4, 0.6, 1.0];
    let mut paths = Vec::new();
    for (seed, v) in finals.iter().enumerate() {
        let p = dir.path().join(format!("bql_{seed}.csv"));
        run_with("bql", seed as u64, &[0.0, *v]).write_csv(fs::File::create(&p).unwrap()).unwrap();
        paths.push(p);
    }
    let table = report(&paths).unwrap();
    let last = table.rows.iter().find(|r| r.step == 200).unwrap();
    assert_eq!(last.n_runs, 4);
    assert!((last.mean_normalized_return - 0.55).abs() < 1e-12);
    // Population deviation of {0.2, 0.4, 0.6, 1.0}.
    let std = ((0.35f64.powi(2) + 0.15f64.powi(2) + 0.05f64.powi(2) + 0.45f64.powi(2)) / 4.0).sqrt();
    assert!((last.std_normalized_return - std).abs() < 1e-12);

    let same = report(&[&paths[0], &paths[0]]).unwrap();
    assert!(same.rows.iter().all(|r| r.std_normalized_return == 0.0));
}

#[test]
fn report_names_mismatched_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    run_with("iql", 0, &[0.1, 0.2]).write_csv(fs::File::create(&a).unwrap()).unwrap();
    run_with("iql", 1, &[0.1, 0.2, 0.3]).write_csv(fs::File::create(&b).unwrap()).unwrap();
    match report(&[&a, &b]) {
        Err(Error::GridMismatch(files)) => assert!(files.iter().any(|f| f.contains("b.csv"))),
        other => panic!("expected grid mismatch, got {other:?}"),
    }
}

#[test]
fn sweep_rejects_unknown_parameter() {
    let cfg = small(bql(), 1, 1);
    assert!(matches!(sweep_in_memory(&cfg, "momentum", &[0.1]), Err(Error::Config(_))));
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(bql(), 1, 1);
    cfg.output = dir.path().display().to_string();
    let points = sweep(&cfg, "buffer_capacity", &[300.0, 600.0]).unwrap();
    assert_eq!(points.len(), 2);
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with(&SWEEP_CSV_HEADER.join(",")));
}

#[test]
fn config_round_trips_through_json() {
    let cfg = small(bql(), 2, 3);
    let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
    assert_eq!(cfg.fingerprint().unwrap(), back.fingerprint().unwrap());
    assert!(ExperimentConfig::from_json(r#"{"learner":{"name":"nope"},"env":{"kind":"one_stage"}}"#).is_err());
}
