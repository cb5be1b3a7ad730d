use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hlmdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hlmdp")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const CHAIN: &str = r#"{"n_states": 2, "lambda": 1.0, "reward_kind": "state",
  "edges": [[0, 0, 0.5, -1.0], [0, 1, 0.5, -1.0]], "terminals": [[1, 0.0]],
  "state_rewards": [-1.0, 0.0]}"#;

#[test]
fn solve_chain() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "chain.json", CHAIN);
    for solver in ["exact", "direct", "power", "power-log", "auto"] {
        let o = hlmdp(&["solve", &model, "--solver", solver]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        let v0 = v["values"][0].as_f64().unwrap();
        assert!((v0 + 1.489880).abs() < 1e-6, "{solver}: {v0}");
    }
}

#[test]
fn underflow_is_a_numerical_failure() {
    let n = 401;
    let edges: Vec<String> = (0..n - 1).map(|s| format!("[{s}, {}, 1.0, -1.0]", s + 1)).collect();
    let mut rewards = vec!["-1.0"; n];
    rewards[n - 1] = "0.0";
    let text = format!(
        r#"{{"n_states": {n}, "lambda": 0.2, "reward_kind": "state", "edges": [{}], "terminals": [[{}, 0.0]], "state_rewards": [{}]}}"#,
        edges.join(","),
        n - 1,
        rewards.join(",")
    );
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "corridor.json", &text);
    assert_eq!(code(&hlmdp(&["solve", &model, "--solver", "power"])), 2);
    assert_eq!(code(&hlmdp(&["solve", &model, "--solver", "auto"])), 0);
}

#[test]
fn validation_failures() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", &CHAIN.replace("[0, 1, 0.5, -1.0]", "[0, 1, 0.7, -1.0]"));
    let o = hlmdp(&["validate", &bad]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    let good = write(dir.path(), "chain.json", CHAIN);
    assert_eq!(code(&hlmdp(&["validate", &good])), 0);

    let cfg = write(dir.path(), "cfg.json", r#"{"domain": "taxi_navigate", "layout": "open5", "method": "Z", "epsilon": 0.1}"#);
    assert_eq!(code(&hlmdp(&["validate", "--config", &cfg])), 1);
    let cfg = write(dir.path(), "cfg2.json", r#"{"domain": "taxi_navigate", "layout": "open5", "method": "Q-G", "epsilon": 0.1}"#);
    assert_eq!(code(&hlmdp(&["validate", "--config", &cfg])), 0);
    assert_eq!(code(&hlmdp(&["validate", "--taxi", "classic"])), 0);
    assert_eq!(code(&hlmdp(&["validate", "--taxi", "nowhere"])), 1);
    assert_eq!(code(&hlmdp(&["validate", "--agv", "reference"])), 0);
}

#[test]
fn learn_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    let runs_s = runs.to_string_lossy().into_owned();
    let args = [
        "learn", "--domain", "taxi-navigate", "--layout", "open5", "--method", "Z-IS", "--c", "100", "--trials",
        "50", "--seeds", "0,1,2", "--out", &runs_s,
    ];
    let o = hlmdp(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(runs.join("Z-IS_seed1.csv")).unwrap();
    assert!(csv.starts_with("trial,metric,steps,seed,method\n"));
    assert_eq!(csv.lines().count(), 51);
    // identical rerun is accepted
    assert_eq!(code(&hlmdp(&args)), 0);

    let report = dir.path().join("report");
    let o = hlmdp(&["report", &runs_s, "--out", &report.to_string_lossy()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(report.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.lines().nth(1).unwrap().starts_with("Z-IS,100,,3,"));
    assert!(report.join("plot").join("Z-IS_c100.csv").exists());
}

#[test]
fn sweep_selects_cells() {
    let dir = tempfile::tempdir().unwrap();
    let grid = write(
        dir.path(),
        "grid.json",
        r#"{"base": {"domain": "taxi_navigate", "layout": "open5", "method": "Z", "trials": 30, "seeds": [0, 1]},
            "methods": ["Z-IS", "Q-G"], "cs": [10, 100], "epsilons": [0.1]}"#,
    );
    let out = dir.path().join("sweep");
    let o = hlmdp(&["sweep", &grid, "--out", &out.to_string_lossy()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert_eq!(summary.lines().filter(|l| l.ends_with(",true")).count(), 2);
    assert!(out.join("Q-G_c10_eps0.1").join("Q-G_seed0.csv").exists());
}
