//! End-to-end checks of the command-line surface.

use std::path::Path;
use std::process::{Command, Output};

fn exe() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_immunotrack"));
    cmd.env_remove("IMMUNOTRACK_SEED");
    cmd
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    exe().current_dir(dir).args(args).output().expect("spawn immunotrack")
}

fn gen_synthetic(dir: &Path, kind: &str, length: &str, out: &str) {
    let output = run_in(
        dir,
        &[
            "gen-synthetic",
            "--set", &format!("synth_kind={kind}"),
            "--set", &format!("synth_length={length}"),
            "--set", "synth_base=60",
            "--output", out,
        ],
    );
    assert!(output.status.success(), "{output:?}");
}

#[test]
fn synthetic_to_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    gen_synthetic(dir.path(), "periodic_noisy", "260", "data.csv");

    let output = run_in(
        dir.path(),
        &["evaluate", "--input", "data.csv", "--output", "report.json"],
    );
    assert!(output.status.success(), "{output:?}");

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert!(report["metrics"]["tracker"]["mae"].is_number());
    assert!(report["metrics"]["steps"].as_u64().unwrap() > 0);
    assert!(report["generations"].is_null()); // evaluate keeps reports slim
    assert_eq!(report["config"]["seed"].as_u64(), Some(42));
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_in(
        dir.path(),
        &["evaluate", "--input", "nowhere.csv", "--output", "report.json"],
    );
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("nowhere.csv"), "diagnostic should name the path: {stderr}");
    assert_eq!(stderr.lines().count(), 1, "one-line diagnostic: {stderr}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    gen_synthetic(dir.path(), "constant", "100", "data.csv");
    let output = run_in(
        dir.path(),
        &[
            "evaluate",
            "--input", "data.csv",
            "--output", "report.json",
            "--set", "pool_size=10",
        ],
    );
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("pool_size"));
}

#[test]
fn missing_output_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    gen_synthetic(dir.path(), "constant", "100", "data.csv");
    let output = run_in(dir.path(), &["evaluate", "--input", "data.csv"]);
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("output"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    gen_synthetic(dir.path(), "periodic", "200", "data.csv");
    std::fs::write(
        dir.path().join("run.conf"),
        "# test config\npool_cap=100\nseed=5\nwarmup=40\n",
    )
    .unwrap();

    let output = run_in(
        dir.path(),
        &[
            "evaluate",
            "--config", "run.conf",
            "--input", "data.csv",
            "--output", "report.json",
            "--set", "pool_cap=50",
        ],
    );
    assert!(output.status.success(), "{output:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["config"]["pool_cap"].as_u64(), Some(50)); // flag beats file
    assert_eq!(report["config"]["seed"].as_u64(), Some(5)); // file beats default
    assert_eq!(report["config"]["warmup"].as_u64(), Some(40));
}

#[test]
fn env_seed_is_lowest_priority() {
    let dir = tempfile::tempdir().unwrap();
    gen_synthetic(dir.path(), "constant", "120", "data.csv");

    let output = exe()
        .current_dir(dir.path())
        .env("IMMUNOTRACK_SEED", "9001")
        .args(["evaluate", "--input", "data.csv", "--output", "env.json"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("env.json")).unwrap())
            .unwrap();
    assert_eq!(report["config"]["seed"].as_u64(), Some(9001));

    let output = exe()
        .current_dir(dir.path())
        .env("IMMUNOTRACK_SEED", "9001")
        .args(["evaluate", "--input", "data.csv", "--seed", "3", "--output", "flag.json"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("flag.json")).unwrap())
            .unwrap();
    assert_eq!(report["config"]["seed"].as_u64(), Some(3));
}

#[test]
fn run_then_forecast_and_inspect() {
    let dir = tempfile::tempdir().unwrap();
    gen_synthetic(dir.path(), "periodic", "300", "data.csv");

    let output = run_in(
        dir.path(),
        &["run", "--input", "data.csv", "--output", "artifact.json"],
    );
    assert!(output.status.success(), "{output:?}");
    let artifact: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("artifact.json")).unwrap())
            .unwrap();
    assert!(artifact["metrics"].is_null());
    assert!(artifact["generations"].is_array());

    // Forecast ahead from the saved artifact against fresh recent data.
    let output = run_in(
        dir.path(),
        &["forecast", "artifact.json", "--input", "data.csv", "--horizon", "3"],
    );
    assert!(output.status.success(), "{output:?}");
    let forecast: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&output.stdout)).unwrap();
    assert_eq!(forecast["predicted"].as_array().unwrap().len(), 3);
    assert_eq!(forecast["confidence"].as_array().unwrap().len(), 3);
    assert_eq!(forecast["anchor"].as_u64(), Some(299)); // last price index

    // Same forecast to a file goes through the atomic writer.
    let output = run_in(
        dir.path(),
        &[
            "forecast", "artifact.json",
            "--input", "data.csv",
            "--horizon", "3",
            "--output", "forecast.json",
        ],
    );
    assert!(output.status.success());
    let from_file: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("forecast.json")).unwrap())
            .unwrap();
    assert_eq!(from_file, forecast);

    let output = run_in(dir.path(), &["inspect", "artifact.json"]);
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("pool: size="));
    assert!(stdout.contains("sequence:"));
    assert!(stdout.contains("patterns:"));
}

#[test]
fn evaluate_accepts_synth_input_directly() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_in(
        dir.path(),
        &[
            "evaluate",
            "--set", "synth_kind=periodic",
            "--set", "synth_length=250",
            "--output", "report.json",
        ],
    );
    assert!(output.status.success(), "{output:?}");
    assert!(dir.path().join("report.json").exists());
}
