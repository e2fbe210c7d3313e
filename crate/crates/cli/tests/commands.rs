use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    let path: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    path.to_str().unwrap().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_valleyscope"))
        .args(args)
        .env_remove("VALLEYSCOPE_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: stderr {}", String::from_utf8_lossy(&out.stderr));
    })
}

#[test]
fn analyze_writes_the_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let status = run(&["analyze", &fixture("chain_e.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(0));
    assert!(status.stdout.is_empty());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    let levels = report["hierarchy"]["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 2);
    assert_eq!(
        levels[0]["timescale"],
        serde_json::json!({"coeff": 1.0, "exponent": "-1"})
    );
    assert_eq!(
        levels[1]["timescale"],
        serde_json::json!({"coeff": 2.0, "exponent": "-2"})
    );
    assert_eq!(report["oracle"]["failed"], serde_json::json!([]));
    assert_eq!(report["conditions"].as_array().unwrap().len(), 2);
    assert_eq!(report["spec"]["states"].as_array().unwrap().len(), 5);
}

#[test]
fn malformed_input_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"states": ["a", "b"], "bonds": [{"from": "a", "to": "b", "coeff": 1.0}]}"#,
    )
    .unwrap();
    let out = run(&["analyze", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exponent"));
    let out = run(&["analyze", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_rejects_bad_arguments() {
    let e = fixture("chain_e.json");
    let out = run(&[
        "simulate",
        &e,
        "--level",
        "5",
        "--epsilon",
        "1e-3",
        "--seed",
        "1",
        "--check",
        "exit",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("level out of range"));
    let out = run(&[
        "simulate",
        &e,
        "--level",
        "1",
        "--epsilon",
        "1e-3",
        "--seed",
        "1",
        "--check",
        "spread",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["simulate", &e, "--level", "1", "--epsilon", "1e-3", "--check", "exit"]);
    assert_eq!(out.status.code(), Some(2), "seed is mandatory");
    let out = run(&[
        "simulate",
        &e,
        "--level",
        "1",
        "--epsilon",
        "1e-3",
        "--seed",
        "1",
        "--check",
        "coverage",
    ]);
    assert_eq!(out.status.code(), Some(2), "level 1 has only singleton valleys");
    let b = fixture("chain_b.json");
    let out = run(&[
        "simulate",
        &b,
        "--level",
        "1",
        "--epsilon",
        "1e-3",
        "--seed",
        "1",
        "--check",
        "delta",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn chain_c_exit_law_and_generator() {
    let c = fixture("chain_c.json");
    let common = ["--level", "1", "--epsilon", "1e-3", "--replicas", "2000", "--seed", "3"];
    let mut args = vec!["simulate", c.as_str()];
    args.extend(common);
    args.extend(["--check", "exit", "--valley", "3"]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    let verdict = &doc["result"][0];
    assert_eq!(verdict["valley"], serde_json::json!(["3"]));
    assert!(verdict["stats"]["ks"].as_f64().unwrap() <= 0.05);
    let ratio = verdict["stats"]["mean_ratio"].as_f64().unwrap();
    assert!((0.9..=1.1).contains(&ratio), "{ratio}");

    let mut args = vec!["simulate", c.as_str()];
    args.extend(common);
    args.extend(["--check", "generator"]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    let entries = doc["result"]["entries"].as_array().unwrap();
    let back = entries.iter().find(|e| e["from"] == 1 && e["to"] == 0).unwrap();
    assert!((back["estimated"].as_f64().unwrap() - 1.0).abs() <= 0.15);
}

#[test]
fn trajectory_export() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("path.csv");
    let out = run(&[
        "simulate",
        &fixture("chain_c.json"),
        "--level",
        "1",
        "--epsilon",
        "1e-2",
        "--replicas",
        "100",
        "--seed",
        "4",
        "--check",
        "delta",
        "--trajectory-out",
        path.to_str().unwrap(),
        "--start",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mut reader = csv::Reader::from_path(&path).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["time", "state"]);
    let rows: Vec<(f64, String)> = reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), r[1].to_string())
        })
        .collect();
    assert_eq!(rows[0], (0.0, "3".to_string()));
    assert!(rows.len() > 2);
    assert!(rows.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 != w[1].1));
}

#[test]
fn validate_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("plot.csv");
    let out = run(&[
        "validate",
        &fixture("chain_e.json"),
        "--eps-grid",
        "1e-2,1e-3,1e-4",
        "--plot-out",
        plot.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out);
    for fit in doc["exponent_fits"].as_array().unwrap() {
        let gap = (fit["slope"].as_f64().unwrap() - fit["exponent"].as_f64().unwrap()).abs();
        assert!(gap <= 0.05, "{fit}");
    }
    // birth-death chains are reversible
    for entry in doc["sandwich"].as_array().unwrap() {
        assert!((entry["report"]["ratio"].as_f64().unwrap() - 1.0).abs() <= 1e-9);
    }
    let text = std::fs::read_to_string(&plot).unwrap();
    assert!(text.starts_with("quantity,epsilon,value,predicted\n"));
    assert_eq!(
        text.lines().count(),
        1 + 3 * doc["exponent_fits"].as_array().unwrap().len()
    );

    let out = run(&["validate", &fixture("chain_e.json"), "--eps-grid", "1e-2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_random_chain() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("random.json");
    let out = run(&[
        "generate",
        "--states",
        "6",
        "--seed",
        "8",
        "--out",
        spec.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["validate", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out);
    for row in doc["equivalence"].as_array().unwrap() {
        for e in row.as_array().unwrap() {
            assert!(e["relative_gap"].as_f64().unwrap() <= 1e-10);
        }
    }
}

#[test]
fn cycles_examples() {
    let out = run(&["cycles", &fixture("cycle3.json"), "--epsilon", "0.5", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    let cycles = doc["cycles"].as_array().unwrap();
    assert_eq!(cycles.len(), 1);
    assert_eq!(cycles[0]["states"], serde_json::json!(["1", "2", "3"]));
    assert!((cycles[0]["flow"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);

    let out = run(&["cycles", &fixture("chain_e.json"), "--epsilon", "0.1", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert!(doc["cycles"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["states"].as_array().unwrap().len() == 2));

    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("r5.json");
    run(&[
        "generate",
        "--states",
        "5",
        "--seed",
        "2",
        "--out",
        spec.to_str().unwrap(),
    ]);
    let out = run(&["cycles", spec.to_str().unwrap(), "--epsilon", "0.1", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert!(doc["residual"].as_f64().unwrap() <= 1e-9);
    assert!(doc["sector"]["max"].as_f64().unwrap() <= doc["sector"]["bound"].as_f64().unwrap());
}

#[test]
fn thread_setting_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_valleyscope"))
        .args(["analyze", &fixture("chain_c.json")])
        .env("VALLEYSCOPE_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_valleyscope"))
        .args(["analyze", &fixture("chain_c.json")])
        .env("VALLEYSCOPE_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}
