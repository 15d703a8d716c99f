//! End-to-end runs of the `hamlearn` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hamlearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamlearn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = hamlearn(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Saturated n = 4, k = 1 instance with 12 terms, as used by several tests.
fn saturated(dir: &Path) -> std::path::PathBuf {
    let h = dir.join("sat.json");
    ok(&["generate", "random", "--n", "4", "--k", "1", "--M", "12", "--seed", "3", "--out", p(&h)]);
    h
}

#[test]
fn generate_random_has_requested_terms_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for f in [&a, &b] {
        ok(&["generate", "--seed", "7", "--out", p(f), "random", "--n", "8", "--k", "2", "--M", "10"]);
    }
    let h = json(&a);
    assert_eq!(h["terms"].as_array().unwrap().len(), 10);
    assert_eq!(h["n"], 8);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn generate_sparse_sy_term_count() {
    let out = ok(&["generate", "sparse-sy", "--n", "6", "--p", "1.0"]);
    let h: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(h["terms"].as_array().unwrap().len(), 45);
}

#[test]
fn learn_meets_target_and_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let h = saturated(dir.path());
    let (r1, r2, man) = (dir.path().join("r1.json"), dir.path().join("r2.json"), dir.path().join("m.json"));
    let out = hamlearn(&["learn", "--hamiltonian", p(&h), "--eps", "0.05", "--out", p(&r1), "--manifest", p(&man)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = json(&r1);
    assert_eq!(rep["success"], true);
    assert!(rep["errors"]["l2"].as_f64().unwrap() <= 0.05);
    ok(&["learn", "--replay", p(&man), "--out", p(&r2)]);
    assert_eq!(std::fs::read(&r1).unwrap(), std::fs::read(&r2).unwrap());
}

#[test]
fn statevector_refuses_large_systems() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("h14.json");
    ok(&["generate", "random", "--n", "14", "--k", "1", "--M", "3", "--out", p(&h)]);
    let out = hamlearn(&["learn", "--hamiltonian", p(&h), "--eps", "0.1", "--mode", "statevector"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dense limit exceeded"));
}

#[test]
fn bench_eps_sweep_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let (csv_path, sum) = (dir.path().join("b.csv"), dir.path().join("s.json"));
    ok(&[
        "bench", "--eps", "0.2,0.1,0.05", "--M", "2", "--n", "4", "--seeds", "0,1", "--k", "1",
        "--median-batch", "7", "--out", p(&csv_path), "--summary", p(&sum),
    ]);
    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers[0], "schema");
    let rows: Vec<_> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    let status = headers.iter().position(|h| h == "status").unwrap();
    assert!(rows.iter().all(|r| &r[status] == "ok"));
    let s = json(&sum);
    let slope = s["groups"][0]["slope_time_vs_inv_eps"].as_f64().unwrap();
    assert!(slope > 0.0, "{slope}");
}

#[test]
fn bench_time_grows_with_m() {
    let dir = tempfile::tempdir().unwrap();
    let sum = dir.path().join("s.json");
    ok(&[
        "bench", "--eps", "0.2", "--M", "2,4,6", "--n", "4", "--k", "1", "--median-batch", "7", "--out",
        p(&dir.path().join("b.csv")), "--summary", p(&sum),
    ]);
    let s = json(&sum);
    let mono = s["time_monotone_in_m"].as_array().unwrap();
    assert_eq!(mono.len(), 1);
    assert_eq!(mono[0][2], true);
}

#[test]
fn check_passes_and_logs_shots() {
    let dir = tempfile::tempdir().unwrap();
    let h = saturated(dir.path());
    let r = dir.path().join("r.json");
    ok(&["learn", "--hamiltonian", p(&h), "--eps", "0.05", "--out", p(&r)]);
    let (log, out) = (dir.path().join("log.jsonl"), dir.path().join("chk.json"));
    let res = hamlearn(&[
        "check", "--hamiltonian", p(&h), "--report", p(&r), "--shots", "500", "--shot-log", p(&log),
        "--out", p(&out),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(json(&out)["violations"], 0);
    let lines = std::fs::read_to_string(&log).unwrap();
    assert_eq!(lines.lines().count(), 2000);
    let first: Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert!(first["outcome"].as_i64().unwrap().abs() == 1);
}

#[test]
fn invalid_parameters_fail() {
    let dir = tempfile::tempdir().unwrap();
    let h = saturated(dir.path());
    for args in [
        vec!["learn", "--hamiltonian", p(&h), "--eps", "-0.1"],
        vec!["learn", "--hamiltonian", p(&h), "--eps", "0.1", "--delta", "1.5"],
        vec!["learn", "--hamiltonian", p(&h), "--eps", "0.1", "--p", "3"],
        vec!["generate", "random", "--n", "3", "--k", "1", "--M", "20"],
        vec!["learn", "--hamiltonian", "/nonexistent.json", "--eps", "0.1"],
    ] {
        let out = hamlearn(&args);
        assert!(!out.status.success(), "{args:?} should fail");
    }
}
