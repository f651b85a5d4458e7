use std::fs;
use std::process::Command;

fn pctc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pctc"))
}

#[test]
fn runs_a_preset_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.txt");
    fs::write(&cfg, "# short run\nsim_duration = 30\nn_nodes = 12\n").unwrap();
    let out = dir.path().join("out");
    let status = pctc()
        .args(["run", "fig3_topology", "--trials", "2", "--seed", "9", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("preset: fig3_topology"));
    assert!(manifest.contains("rng_seed = 9"));
    let rows = fs::read_to_string(out.join("topology_trials.csv")).unwrap();
    // Header plus 3 sweep points x 2 trials.
    assert_eq!(rows.lines().count(), 7);
    assert!(out.join("topology_summary.csv").exists());
}

#[test]
fn invalid_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.txt");
    fs::write(&cfg, "tx_range = -5\n").unwrap();
    let out = pctc().args(["validate"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("tx_range"));

    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let out = pctc().args(["run", "fig2_prediction", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn property_check_passes() {
    let out = pctc()
        .args(["check-properties", "--graphs", "20", "--max-nodes", "12"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("connectivity: 20/20"));
}

#[test]
fn reports_version() {
    let out = pctc().arg("version").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("pctc "));
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let out = pctc().args(["run", "fig9"]).output().unwrap();
    assert!(!out.status.success());
}
