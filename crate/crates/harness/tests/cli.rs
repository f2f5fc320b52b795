use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hlab::{default_config, ExperimentConfig, REGISTRY};
use serde_json::Value;

fn hlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hlab"))
        .args(args)
        .output()
        .expect("spawn hlab")
}

fn small_axioms(seed: u64, runtime: f64) -> String {
    format!(
        r#"{{
  "experiment": "group-axioms",
  "n": 1,
  "seed": {seed},
  "tolerance": 1e-6,
  "samples": {{ "points": 2000 }},
  "thresholds": {{ "max-abs-error": 1e-10, "runtime-seconds": {runtime} }},
  "params": {{ "coordinate-range": 2.0, "dilation-range": [0.25, 4.0] }}
}}"#
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn run_config(config: &str, out: &Path) -> Output {
    hlab(&[
        "run",
        "group-axioms",
        "--config",
        config,
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn list_names_every_experiment() {
    let out = hlab(&["list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for e in REGISTRY {
        assert!(text.contains(e.name), "{} missing from list", e.name);
    }
}

#[test]
fn every_shipped_config_parses_and_validates() {
    for e in REGISTRY {
        let cfg = default_config(e.name).unwrap();
        assert_eq!(cfg.experiment, e.name);
        cfg.validate().unwrap();
    }
}

#[test]
fn registry_covers_all_criteria() {
    for i in 1..=12 {
        let id = format!("C{i}");
        assert!(
            REGISTRY.iter().any(|e| e.criteria.contains(&id.as_str())),
            "{id} has no experiment"
        );
    }
}

#[test]
fn config_subcommand_prints_the_default() {
    let out = hlab(&["config", "luxemburg-golden"]);
    assert_eq!(out.status.code(), Some(0));
    let cfg = ExperimentConfig::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.experiment, "luxemburg-golden");
}

#[test]
fn unknown_experiment_is_a_config_error() {
    assert_eq!(hlab(&["run", "no-such-experiment"]).status.code(), Some(2));
    assert_eq!(
        hlab(&["config", "no-such-experiment"]).status.code(),
        Some(2)
    );
}

#[test]
fn malformed_configs_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown_field = small_axioms(1, 10.0).replacen("\"n\": 1,", "\"n\": 1, \"bogus\": 3,", 1);
    let bad_n = small_axioms(1, 10.0).replacen("\"n\": 1,", "\"n\": 0,", 1);
    for (name, text) in [
        ("unknown.json", unknown_field.as_str()),
        ("bad-n.json", bad_n.as_str()),
        ("truncated.json", "{ \"experiment\": "),
    ] {
        let path = write(dir.path(), name, text);
        let out = run_config(&path, dir.path());
        assert_eq!(out.status.code(), Some(2), "{name}");
    }
    let path = write(dir.path(), "other.json", &small_axioms(1, 10.0));
    let out = hlab(&["run", "koranyi-props", "--config", &path]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_check_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "cfg.json", &small_axioms(1, 0.0));
    let out = run_config(&path, dir.path());
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[FAIL] C1 runtime-seconds"));
}

#[test]
fn same_config_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "cfg.json", &small_axioms(7, 10.0));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run_config(&path, &a).status.code(), Some(0));
    assert_eq!(run_config(&path, &b).status.code(), Some(0));
    let csv_a = fs::read(a.join("group-axioms.csv")).unwrap();
    let csv_b = fs::read(b.join("group-axioms.csv")).unwrap();
    assert!(!csv_a.is_empty());
    assert_eq!(csv_a, csv_b);
}

#[test]
fn seed_changes_data_but_not_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let one = write(dir.path(), "one.json", &small_axioms(1, 10.0));
    let two = write(dir.path(), "two.json", &small_axioms(2, 10.0));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run_config(&one, &a).status.code(), Some(0));
    assert_eq!(run_config(&two, &b).status.code(), Some(0));
    assert_ne!(
        fs::read(a.join("group-axioms.csv")).unwrap(),
        fs::read(b.join("group-axioms.csv")).unwrap()
    );
    let summary = |d: &Path| -> Value {
        serde_json::from_str(&fs::read_to_string(d.join("group-axioms-summary.json")).unwrap())
            .unwrap()
    };
    let (sa, sb) = (summary(&a), summary(&b));
    assert_eq!(sa["config_hash"], sb["config_hash"]);
    assert_eq!(sa["seed"], 1);
    assert_eq!(sb["seed"], 2);
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "cfg.json", &small_axioms(1, 10.0));
    let out = hlab(&[
        "run",
        "group-axioms",
        "--config",
        &path,
        "--seed",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let header = fs::read_to_string(dir.path().join("group-axioms.csv")).unwrap();
    assert!(header.lines().nth(1).unwrap().ends_with("seed 2"));
}

#[test]
fn golden_default_run_passes_with_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = hlab(&[
        "run",
        "luxemburg-golden",
        "--plot",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("luxemburg-golden-summary.json").exists());
}
