use std::path::Path;
use std::process::Command;

use bdes_lab::runner::validate_regret_csv;
use serde_json::json;

fn bdes() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bdes"));
    cmd.env_remove("BDES_JOBS");
    cmd
}

fn write_config(dir: &Path, value: serde_json::Value) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, value.to_string()).unwrap();
    path
}

fn small_config() -> serde_json::Value {
    json!({
        "name": "cli",
        "instance": {"proposition1": {"epsilon": 0.1, "horizon": 400}},
        "lambdas": [0.5, 1.0],
        "algos": ["ucb1", "exp3", "aae", "batched_sticky", "benchmark"],
        "seeds": {"base": 9, "count": 3}
    })
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn validate_reports_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), small_config());
    assert_eq!(
        bdes()
            .args(["validate", "--config"])
            .arg(&good)
            .status()
            .unwrap()
            .code(),
        Some(0)
    );

    let mut bad = small_config();
    bad["seeds"] = json!([]);
    let bad = write_config(dir.path(), bad);
    let out = bdes()
        .args(["validate", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));

    let missing = dir.path().join("missing.json");
    assert_eq!(
        bdes()
            .args(["validate", "--config"])
            .arg(&missing)
            .status()
            .unwrap()
            .code(),
        Some(2)
    );
}

#[test]
fn run_is_byte_identical_and_manifest_replays() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), small_config());
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    let status = bdes()
        .args(["run", "--jobs", "1", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&a)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let status = bdes()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&b)
        .env("BDES_JOBS", "4")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let status = bdes()
        .args(["run", "--config"])
        .arg(a.join("manifest.json"))
        .arg("--out")
        .arg(&c)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let manifest: serde_json::Value =
        serde_json::from_slice(&read(&a.join("manifest.json"))).unwrap();
    let outputs = manifest["outputs"].as_object().unwrap();
    assert!(outputs.contains_key("regret.csv") && outputs.contains_key("summary.json"));
    assert_eq!(outputs.len(), 4, "csv, summary and two plans");
    for rel in outputs.keys().map(String::as_str).chain(["manifest.json"]) {
        let first = read(&a.join(rel));
        assert_eq!(first, read(&b.join(rel)), "{rel} differs across job counts");
        assert_eq!(
            first,
            read(&c.join(rel)),
            "{rel} differs after manifest replay"
        );
    }
    assert!(a.join("timings.json").exists());

    let rows = validate_regret_csv(&a.join("regret.csv")).unwrap();
    let per_replication = bdes_lab::runner::curve_points(400).len();
    assert_eq!(rows, 2 * 5 * 3 * per_replication);
}

#[test]
fn benchmark_algo_has_zero_regret() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), small_config());
    let out = dir.path().join("o");
    bdes()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    let mut reader = csv::Reader::from_path(out.join("regret.csv")).unwrap();
    let mut seen = 0;
    for record in reader.records() {
        let record = record.unwrap();
        if &record[1] == "benchmark" {
            assert_eq!(record[4].parse::<f64>().unwrap(), 0.0);
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn budget_flags_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        json!({
            "name": "flagged",
            "instance": {"inline": {"lambda": 0.5, "horizon": 300, "arms": [{"r": 0.6, "b": 1.0}, {"r": 0.9, "b": 0.3}]}},
            "algos": ["etc_known"],
            "seeds": [0]
        }),
    );
    let out = bdes()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let summary: serde_json::Value =
        serde_json::from_slice(&read(&dir.path().join("o/summary.json"))).unwrap();
    assert_eq!(summary["groups"][0]["flagged"], 1);
}

#[test]
fn unknown_preset_and_unwritable_output() {
    let out = bdes().args(["run", "--preset", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), small_config());
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let out = bdes()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn plan_prints_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    std::fs::write(
        &path,
        r#"{"lambda": 1.0, "horizon": 4, "arms": [{"r": 0.5, "b": 1.0}, {"r": 0.7, "b": 0.7}]}"#,
    )
    .unwrap();
    let out = bdes()
        .args(["plan", "--instance"])
        .arg(&path)
        .args(["--epsilon", "0.01"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["sequence"], json!([0, 1, 0, 1]));
    assert!((v["expected_total"].as_f64().unwrap() - 2.25).abs() < 1e-12);

    std::fs::write(&path, "{}").unwrap();
    let out = bdes()
        .args(["plan", "--instance"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
