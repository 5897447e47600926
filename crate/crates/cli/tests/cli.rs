use std::path::Path;
use std::process::Command;

fn lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_awgn-lab"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const NONFEEDBACK: &str = "experiment = \"nonfeedback-gap\"\nhorizon = 8.0\nn_list = [4, 8, 16]\nfine_n = 1024\n";

#[test]
fn passing_run_exits_zero_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), NONFEEDBACK);
    let out = dir.path().join("out");
    let status = lab()
        .args(["nonfeedback-gap", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stdout));
    for name in ["nonfeedback_gap.csv", "nonfeedback_gap_report.json", "nonfeedback_gap_loglog.dat"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let stdout = String::from_utf8_lossy(&status.stdout);
    assert!(stdout.contains("[PASS] gap-below-cor1"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), NONFEEDBACK);
    let out = dir.path().join("o");
    let status = lab()
        .args(["nonfeedback-gap", "--seed", "77", "--fine-n", "2048", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("nonfeedback_gap_report.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["seed"], 77);
    assert_eq!(json["config"]["fine_n"], 2048);
    assert_eq!(json["schema_version"], 1);
}

#[test]
fn failing_checks_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // a four-point fit of the square moment lies outside the requested window
    let cfg = write_config(
        dir.path(),
        "experiment = \"maxgauss\"\nn_list = [16, 32, 64, 128]\ntrials = 0\nsquare_slope_range = [-0.5, -0.4]\n",
    );
    let status = lab().args(["maxgauss", "--config"]).arg(&cfg).arg("--out-dir").arg(dir.path()).output().unwrap().status;
    assert_eq!(status.code(), Some(1));
}

#[test]
fn bad_configs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "unknown_key = 3\n");
    let status = lab().args(["sanity", "--config"]).arg(&cfg).output().unwrap().status;
    assert_eq!(status.code(), Some(2));
    let cfg = write_config(dir.path(), NONFEEDBACK);
    let out = lab().args(["feedback-gap", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config is for"));
}
