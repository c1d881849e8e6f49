use std::fs;
use std::path::Path;
use std::process::Command;

use coopsense::bench::Scheme;
use coopsense::experiment::{make_default_scenario, run_experiment, ExperimentConfig, RESULT_COLUMNS};
use coopsense::netmodel::SystemParams;
use coopsense::scene::{LidarConfig, ScenarioDoc};
use coopsense::Error;

/// A quick config: a small training set and few epochs.
fn quick_config(out: &Path) -> ExperimentConfig {
    let text = format!(
        r#"{{
            "K": 2,
            "training_samples": 160,
            "training": {{ "epochs": 20 }},
            "ga": {{ "J": 12, "Gamma": 10 }},
            "seed": 3,
            "out_dir": {:?}
        }}"#,
        out.to_str().unwrap()
    );
    let path = out.with_extension("json");
    fs::write(&path, text).unwrap();
    ExperimentConfig::load(&path).unwrap()
}

#[test]
fn config_file_fields_land_in_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(&dir.path().join("out"));
    assert_eq!(cfg.k.get(), 2);
    assert_eq!(cfg.training_samples, 160);
    assert_eq!(cfg.training.epochs, 20);
    assert_eq!((cfg.ga.population, cfg.ga.generations), (12, 10));
    assert_eq!(cfg.epsilon, vec![10000.0, 20000.0, 30000.0, 40000.0]);
    assert_eq!(cfg.schemes, Scheme::ALL.to_vec());
}

#[test]
fn unknown_config_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(&path, r#"{ "epsilons": [1] }"#).unwrap();
    assert!(matches!(ExperimentConfig::load(&path), Err(Error::Json { .. })));
}

#[test]
fn sweep_writes_one_row_per_scheme_and_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let report = run_experiment(&quick_config(&out)).unwrap();
    assert_eq!(report.rows.len(), 20);
    let text = fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), RESULT_COLUMNS.join(","));
    assert_eq!(lines.count(), 20);
    for name in ["elite_history.csv", "summary.txt", "model.bin", "model.json"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    for r in report.rows.iter().filter(|r| r.feasible) {
        assert!(r.total_cost.is_some_and(|c| (0.0..=1.0).contains(&c)));
        assert_eq!(r.elapsed_ms, 0.0);
    }
}

#[test]
fn missing_scenario_names_the_path() {
    let cfg = ExperimentConfig {
        scenario: Some("/nonexistent/scene.json".into()),
        ..ExperimentConfig::default()
    };
    let msg = run_experiment(&cfg).unwrap_err().to_string();
    assert!(msg.contains("/nonexistent/scene.json"), "{msg}");
}

#[test]
fn scenario_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scene.json");
    let scene = make_default_scenario(4);
    let params = SystemParams {
        deadline: 0.05,
        ..SystemParams::default()
    };
    ScenarioDoc::from_scenario(&scene, &LidarConfig::default(), Some(params))
        .save(&path)
        .unwrap();
    let doc = ScenarioDoc::load(&path).unwrap();
    assert_eq!(doc.to_scenario().unwrap(), scene);
    assert_eq!(doc.params, Some(params));
    assert_eq!(doc.lidar, LidarConfig::default());
}

#[test]
fn cli_runs_a_single_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = quick_config(&out);
    let cfg_path = out.with_extension("json");
    assert!(cfg_path.is_file());
    let status = Command::new(env!("CARGO_BIN_EXE_coopsense"))
        .args(["--config", cfg_path.to_str().unwrap()])
        .args(["--scheme", "nearest", "--epsilon", "10000,30000", "--accuracy-req", "0.8"])
        .args(["--seed", &cfg.seed.to_string(), "--K", "1", "--train"])
        .args(["--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = fs::read_to_string(out.join("results.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.starts_with("nearest,") && r.contains(",0.8,1,3,")));

    // the trained model is reusable through --model
    let again = dir.path().join("again");
    let status = Command::new(env!("CARGO_BIN_EXE_coopsense"))
        .args(["--model", out.join("model.bin").to_str().unwrap(), "--K", "1"])
        .args(["--scheme", "all", "--epsilon", "20000", "--out", again.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert_eq!(fs::read_to_string(again.join("results.csv")).unwrap().lines().count(), 6);

    let pair = dir.path().join("pair");
    let status = Command::new(env!("CARGO_BIN_EXE_coopsense"))
        .args(["--model", out.join("model.bin").to_str().unwrap(), "--K", "1"])
        .args(["--scheme", "all,proposed", "--epsilon", "20000", "--out", pair.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = fs::read_to_string(pair.join("results.csv")).unwrap();
    let schemes: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(schemes, ["all", "proposed"]);
}

#[test]
fn cli_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["--scheme", "fastest"],
        vec!["--K", "7"],
        vec!["--model", "/nonexistent/model.bin"],
    ] {
        let out = Command::new(env!("CARGO_BIN_EXE_coopsense"))
            .args(&args)
            .args(["--out", dir.path().to_str().unwrap()])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
}
