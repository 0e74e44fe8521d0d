use std::path::PathBuf;
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/scenarios")
        .join(name)
}

fn sigflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn simulate_writes_snapshots_report_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenario("reference.toml");
    let out = sigflow(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--plot",
        "rho",
        "--oracle-check",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("mass: initial"), "{stdout}");
    assert!(stdout.contains("oracle at t="), "{stdout}");

    let snaps = std::fs::read_dir(dir.path().join("snapshots"))
        .unwrap()
        .count();
    assert!(snaps > 10);
    assert!(dir.path().join("snapshots/snapshot_0000.csv").is_file());
    assert!(dir.path().join("plot_rho.csv").is_file());
    assert!(dir.path().join("plot_rho.svg").is_file());

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["status"], "completed");
    assert_eq!(report["phases"].as_array().unwrap().len(), 4);
    assert_eq!(report["oracle"]["status"], "compared");
}

#[test]
fn overrides_change_model_and_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenario("reference.toml");
    let out = sigflow(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--model",
        "second",
        "--nx",
        "100",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["model"], "second");
    let first = std::fs::read_to_string(dir.path().join("snapshots/snapshot_0000.csv")).unwrap();
    assert_eq!(first.lines().count(), 2 + 100);
}

#[test]
fn validate_accepts_bundled_scenarios() {
    for name in ["reference.toml", "parked.toml", "custom_braking.toml"] {
        let out = sigflow(&["validate", "--config", scenario(name).to_str().unwrap()]);
        assert!(out.status.success(), "{name}: {}", text(&out.stderr));
        assert!(text(&out.stdout).contains("valid"));
    }
}

#[test]
fn validate_lists_problems_and_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let original = std::fs::read_to_string(scenario("reference.toml")).unwrap();
    std::fs::write(&bad, original.replace("tau0 = 4.0", "tau0 = -4.0")).unwrap();
    let out = sigflow(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = text(&out.stderr);
    assert!(stderr.contains("signal.tau0"), "{stderr}");
    assert!(stderr.contains("line"), "{stderr}");
}

#[test]
fn missing_config_is_an_error() {
    let out = sigflow(&["validate", "--config", "/nonexistent/scenario.toml"]);
    assert!(!out.status.success());
}

#[test]
fn verify_oracle_reports_two_resolutions() {
    let out = sigflow(&[
        "verify-oracle",
        "--config",
        scenario("reference.toml").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("200 ")), "{stdout}");
    assert!(stdout.lines().any(|l| l.starts_with("800 ")), "{stdout}");
    assert!(stdout.contains("density error ratio"), "{stdout}");
}
