use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bql(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bql")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

const SMALL: &str = r#"{
  "learner": {"name": "bql", "total_steps": 2000, "buffer_capacity": 500},
  "env": {"kind": "random", "n_agents": 2, "n_states": 4, "n_actions": 2, "gamma": 0.9},
  "n_games": 2,
  "n_seeds": 2
}"#;

#[test]
fn gen_game_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("game.json");
    let o = bql(&["gen-game", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(bql_core::JointMdp::from_json(&text).is_ok());
}

#[test]
fn train_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("train");
    let o = bql(&["train", "--config", &cfg, "--out", out.to_str().unwrap(), "--game", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<_> = fs::read_dir(&out).unwrap().collect();
    assert_eq!(files.len(), 1);
    let r = bql(&["report", out.to_str().unwrap()]);
    assert!(r.status.success());
    assert!(String::from_utf8_lossy(&r.stdout).contains("bql"));
}

#[test]
fn experiment_is_reproducible_and_reportable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("exp");
    let run = || {
        let o = bql(&["experiment", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "4"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out.join("aggregate.csv")).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert_eq!(fs::read_dir(out.join("runs")).unwrap().count(), 4);
    let rep = dir.path().join("rep");
    let r = bql(&["report", out.to_str().unwrap(), "--out", rep.to_str().unwrap()]);
    assert!(r.status.success());
    assert!(rep.join("report.csv").exists());
}

#[test]
fn sweep_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("sweep");
    let o = bql(&[
        "sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--param", "subset_fraction", "--values", "0.5,1.0",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), r#"{"learner": {"name": "bql", "lambda_typo": 1}, "env": {"kind": "one_stage"}}"#);
    assert_eq!(bql(&["experiment", "--config", &bad]).status.code(), Some(2));
    assert_eq!(bql(&["experiment"]).status.code(), Some(2));
    let good = write_config(dir.path(), SMALL);
    let o = bql(&["sweep", "--config", &good, "--param", "momentum", "--values", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unconverged_oracle_exits_with_three() {
    // gamma close to 1 with this many states cannot meet the oracle tolerance.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"learner": {"name": "iql", "total_steps": 100},
            "env": {"kind": "random", "n_agents": 2, "n_states": 3, "n_actions": 2, "gamma": 0.999999999},
            "output": "unused"}"#,
    );
    let out = dir.path().join("o");
    let o = bql(&["experiment", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
