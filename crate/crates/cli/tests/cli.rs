use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn capalloc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capalloc")).args(args).current_dir(dir).output().unwrap()
}

fn ok(args: &[&str], dir: &Path) -> Output {
    let out = capalloc(args, dir);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write(dir: &Path, name: &str, value: &Value) {
    std::fs::write(dir.join(name), serde_json::to_string_pretty(value).unwrap()).unwrap();
}

fn read(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn toy_learning_files(dir: &Path) {
    write(
        dir,
        "training.json",
        &json!({"num_agent_types": 2, "tasks": [{"task_id": 1, "samples": [
            {"team": [2, 0], "performance": 1.0, "valid": true},
            {"team": [0, 2], "performance": 1.0, "valid": true},
            {"team": [1, 0], "performance": 0.0, "valid": false}
        ]}]}),
    );
    write(
        dir,
        "sparsity.json",
        &json!({"num_agent_types": 2, "num_capabilities": 1, "num_tasks": 1, "A1": [[1, 1], [1, 2]], "B1": [[1, 1]]}),
    );
}

/// One task, one agent type with two agents, unit capability. Nodes are
/// the task, then s, then u.
fn toy_instance(dir: &Path, requirement: f64) {
    write(
        dir,
        "model.json",
        &json!({"num_agent_types": 1, "num_capabilities": 1, "num_tasks": 1, "A": [[1.0]], "b": [[requirement]],
                "sparsity": {"A1": [[1, 1]], "B1": [[1, 1]]}}),
    );
    write(
        dir,
        "instance.json",
        &json!({"num_tasks": 1, "num_agent_types": 1, "model": "model.json",
                "travel_time": [[[0, 0, 3], [2, 0, 0], [0, 0, 0]]],
                "task_time": [[4]],
                "travel_energy": [[[0, 0, 1], [1, 0, 0], [0, 0, 0]]],
                "energy_limit": [null], "fleet": [2], "energy_weight": 1.0, "time_weight": 1.0}),
    );
}

#[test]
fn learn_splits_symmetric_positives() {
    let dir = tempfile::tempdir().unwrap();
    toy_learning_files(dir.path());
    ok(&["learn", "--training", "training.json", "--sparsity", "sparsity.json", "--out", "model.json"], dir.path());
    let model = read(dir.path(), "model.json");
    assert_eq!(model["A"], json!([[0.5, 0.5]]));
    assert_eq!(model["b"], json!([[1.0]]));
    let report = read(dir.path(), "learn_report.json");
    assert_eq!(report["capabilities"][0]["capability"], json!(1));
}

#[test]
fn allocate_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    toy_instance(dir.path(), 2.0);
    let out = ok(&["allocate", "--instance", "instance.json", "--out", "plan.json"], dir.path());
    assert!(String::from_utf8_lossy(&out.stdout).contains("s -> 1 -> u"));
    let plan = read(dir.path(), "plan.json");
    assert_eq!(plan["teams"], json!([[2]]));
    // Energy 1 + 1 for each of two agents plus mission time 2 + 4 + 3.
    assert_eq!(plan["objective"], json!(13.0));
    ok(&["validate", "--instance", "instance.json", "--plan", "plan.json"], dir.path());
}

#[test]
fn validate_rejects_tampered_plan() {
    let dir = tempfile::tempdir().unwrap();
    toy_instance(dir.path(), 2.0);
    ok(&["allocate", "--instance", "instance.json", "--out", "plan.json"], dir.path());
    let mut plan = read(dir.path(), "plan.json");
    plan["start_times"][1] = json!(0.5);
    write(dir.path(), "bad.json", &plan);
    let out = capalloc(&["validate", "--instance", "instance.json", "--plan", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("time"));
}

#[test]
fn infeasible_instance_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    toy_instance(dir.path(), 3.0);
    let out = capalloc(&["allocate", "--instance", "instance.json", "--out", "plan.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
    assert!(!dir.path().join("plan.json").exists());
}

#[test]
fn generated_benchmark_feeds_learn() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen-bench", "--case", "0", "--seed", "4", "--mode", "random", "--out", "gb"], dir.path());
    ok(
        &["learn", "--training", "gb/training.json", "--sparsity", "gb/sparsity.json", "--out", "gb/model.json"],
        dir.path(),
    );
    let model = read(dir.path(), "gb/model.json");
    assert_eq!(model["num_tasks"], json!(8));
    assert_eq!(read(dir.path(), "gb/case.json")["seed"], json!(4));

    ok(&["gen-bench", "--case", "0", "--seed", "4", "--mode", "random", "--out", "again"], dir.path());
    for name in ["ground_truth.json", "training.json", "pools.json", "sparsity.json"] {
        let a = std::fs::read(dir.path().join("gb").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("again").join(name)).unwrap();
        assert!(a == b, "{name} differs between runs");
    }
}

#[test]
fn custom_case_from_file() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "case.json",
        &json!({"num_tasks": 2, "num_agent_types": 2, "num_capabilities": 2, "per_type_count": 3,
                "pool_size": 16, "random_train_cap": 8, "realizations": 2}),
    );
    ok(
        &[
            "bench",
            "--case",
            "custom",
            "--spec",
            "case.json",
            "--realizations",
            "3",
            "--train-cap",
            "8",
            "--out",
            "r.csv",
        ],
        dir.path(),
    );
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn bench_writes_one_row_per_realization() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["bench", "--case", "0", "--mode", "random", "--seed", "7", "--no-timing", "--out"];
    ok(&[&args[..], &["a.csv"]].concat(), dir.path());
    ok(&[&args[..], &["b.csv"]].concat(), dir.path());
    let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(dir.path().join("b.csv")).unwrap());
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "case,realization,mode,sparsity_error,pred_error,false_pos,false_neg,train_seconds");
    assert_eq!(lines.len(), 11);
    for line in &lines[1..] {
        let error: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&error));
    }
}

#[test]
fn label_applies_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "raw.json",
        &json!({"num_agent_types": 2, "tasks": [
            {"task_id": 1, "samples": [
                {"team": [1, 0], "performance": 150.0},
                {"team": [0, 1], "performance": 250.0}
            ]},
            {"task_id": 2, "threshold": 190.0, "samples": [
                {"team": [1, 1], "draws": [85.0, 90.0, 100.0, 120.0, 240.0]},
                {"team": [2, 0], "draws": [85.0, 90.0, 200.0, 220.0, 240.0]}
            ]}
        ]}),
    );
    ok(&["label", "--training", "raw.json", "--threshold", "200", "--out", "training.json"], dir.path());
    let t = read(dir.path(), "training.json");
    let valid = |task: usize, n: usize| t["tasks"][task]["samples"][n]["valid"].clone();
    assert_eq!((valid(0, 0), valid(0, 1)), (json!(true), json!(false)));
    assert_eq!((valid(1, 0), valid(1, 1)), (json!(true), json!(false)));
    assert_eq!(t["tasks"][1]["task_id"], json!(2));

    let out = capalloc(
        &["label", "--training", "raw.json", "--threshold", "200", "--stochastic", "--out", "s.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(capalloc(&["bench", "--case", "12"], dir.path()).status.code(), Some(2));
    assert_eq!(capalloc(&["learn"], dir.path()).status.code(), Some(2));
    assert_eq!(capalloc(&["frobnicate"], dir.path()).status.code(), Some(2));
    toy_learning_files(dir.path());
    let out = capalloc(
        &["learn", "--training", "training.json", "--sparsity", "sparsity.json", "--alpha-a", "-1", "--out", "m.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_cap_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    toy_learning_files(dir.path());
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_capalloc"))
            .args(["learn", "--training", "training.json", "--sparsity", "sparsity.json", "--out", "m.json"])
            .env("CAPALLOC_THREADS", threads)
            .current_dir(dir.path())
            .output()
            .unwrap()
    };
    assert!(run("1").status.success());
    assert_eq!(run("zero").status.code(), Some(2));
}

#[test]
fn missing_input_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = capalloc(&["learn", "--training", "nope.json", "--sparsity", "nope.json", "--out", "m.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
}
