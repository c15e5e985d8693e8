use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_lpp-noise");
const SMALL: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/small.json");
const GOLDEN: &str = include_str!("data/headers.golden");

fn run(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

/// Every CSV under `dir`, keyed by `experiment_dir/file`.
fn csvs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let sub = e.unwrap().path();
        if !sub.is_dir() {
            continue;
        }
        for f in fs::read_dir(&sub).unwrap() {
            let f = f.unwrap().path();
            let name = f.file_name().unwrap().to_string_lossy().to_string();
            if name.ends_with(".csv") || name == "summary.json" {
                let key = format!("{}/{}", sub.file_name().unwrap().to_string_lossy(), name);
                out.insert(key, fs::read(&f).unwrap());
            }
        }
    }
    out
}

#[test]
fn csv_headers_match_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "--config", SMALL, "--out", dir.path().to_str().unwrap()]);
    assert!(matches!(out.status.code(), Some(0 | 2)), "{}", String::from_utf8_lossy(&out.stderr));
    let files = csvs(dir.path());
    let mut got = String::new();
    for (k, v) in files.iter().filter(|(k, _)| k.ends_with(".csv")) {
        let header = String::from_utf8_lossy(v).lines().next().unwrap().to_string();
        got.push_str(&format!("{k}: {header}\n"));
    }
    assert_eq!(got, GOLDEN);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&["run", "--config", SMALL, "--out", a.path().to_str().unwrap(), "--threads", "1"]);
    run(&["run", "--config", SMALL, "--out", b.path().to_str().unwrap(), "--threads", "3"]);
    let (x, y) = (csvs(a.path()), csvs(b.path()));
    assert!(!x.is_empty());
    assert_eq!(x.keys().collect::<Vec<_>>(), y.keys().collect::<Vec<_>>());
    for (k, v) in &x {
        assert!(v == &y[k], "{k} differs between thread counts");
    }
}

#[test]
fn manifest_records_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"seed": 5, "experiments": [{"name": "dump-geodesic", "params": {"n": 3}}]}"#).unwrap();
    let out_dir = dir.path().join("o");
    let out = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_slice(&fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["master_seed"], 5);
    assert_eq!(m["config_echo"]["experiments"][0]["params"]["n"], 3);
    assert_eq!(m["config_echo"]["experiments"][0]["params"]["p"], 0.5);
    assert!(m["started_at"].is_string() && m["finished_at"].is_string());
    assert!(out_dir.join("00_dump-geodesic/geodesic.csv").exists());
    assert!(out_dir.join("00_dump-geodesic/summary.json").exists());
}

#[test]
fn empty_experiment_list_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"seed": 1, "experiments": []}"#).unwrap();
    let out = run(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn bad_parameter_exits_one_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"experiments": [{"name": "dump-field"}, {"name": "corr-decay", "params": {"p": 1.5}}]}"#).unwrap();
    let out_dir = dir.path().join("o");
    let out = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`p`"));
    assert!(!out_dir.exists(), "nothing runs before validation passes");
    let flag = run(&["corr-decay", "--p", "1.5"]);
    assert_eq!(flag.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&flag.stderr).contains("`p`"));
}

#[test]
fn failed_assertion_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "--out",
        dir.path().to_str().unwrap(),
        "corr-decay",
        "--n",
        "10",
        "--t-list",
        "1.0,1.001",
        "--replicas",
        "40",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
