use std::fs;
use std::process::Command;

use mlda_harness::{run_all, ExperimentConfig, ExperimentId};

fn small_suite() -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ExperimentId::All);
    c.set_trials(100);
    c.divergence.instances = 5;
    c.convergence.trials = 5;
    c.factors.trials = 5;
    c.regularization.trials = 5;
    c.distance.draws = 10;
    c.distance.pairs = 20;
    c.interaction.pairs = 20;
    c.interaction.draws = 10;
    c.concentration.pairs = 5;
    c
}

#[test]
fn csv_output_does_not_depend_on_thread_count() {
    let cfg = small_suite();
    let one = run_all(&cfg, 1).unwrap();
    let four = run_all(&cfg, 4).unwrap();
    assert_eq!(one.len(), 8);
    for (a, b) in one.iter().zip(&four) {
        assert_eq!(a.table.to_csv().unwrap(), b.table.to_csv().unwrap(), "{}", a.id.name());
        assert_eq!(a.passes, b.passes);
    }
}

#[test]
fn cli_writes_reports_and_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_mlda");

    let cfg = dir.path().join("rank.json");
    fs::write(&cfg, r#"{"experiment": "rank"}"#).unwrap();
    let out = dir.path().join("out");
    let status = Command::new(bin)
        .args(["rank", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "3", "--threads", "2"])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("rank.csv")).unwrap();
    assert!(csv.starts_with("Setting,n,d,L,rank(S_b^ML),Excess\n"));
    assert_eq!(csv.lines().count(), 7);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("rank.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 3);
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"experiment": "divergence", "divergence": {"r": 40}}"#).unwrap();
    let output = Command::new(bin).args(["divergence", "--config"]).arg(&bad).arg("--out").arg(&out).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("invalid config"));
    assert!(!out.join("divergence.csv").exists());
}
