use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn twolevel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twolevel")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn help_lists_subcommands() {
    let out = twolevel(&["--help"]);
    assert!(out.status.success());
    let help = text(&out.stdout);
    for cmd in ["steady", "unsteady", "verify-slab", "consistency-study"] {
        assert!(help.contains(cmd), "{help}");
    }
}

#[test]
fn verify_slab_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = twolevel(&["verify-slab", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("u(top) = 20.9525000000"));
    let csv = std::fs::read_to_string(dir.path().join("slab_h20.csv")).unwrap();
    assert!(csv.starts_with("h_minus,rel_l2_error\n"));
}

#[test]
fn slab_with_large_theta_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("slab.json");
    std::fs::write(&cfg, r#"{"material": {"rho_minus": 1.0}, "source": {"kind": "constant_flux", "value": 1.0}, "mesh": {"global_n": [20], "local_n": [20], "degree": 1}, "two_level": {"theta": 0.5, "tol": 1e-10}}"#).unwrap();
    let out = twolevel(&["verify-slab", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    assert!(err.contains("diverged") && err.contains("theta = Fixed(0.5)"), "{err}");
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"two_level": {"thetaa": 0.5}}"#).unwrap();
    let out = twolevel(&["steady", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("two_level.thetaa"));
}

#[test]
fn steady_needs_a_config() {
    let out = twolevel(&["steady"]);
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("--config"));
}

#[test]
fn show_config_fills_defaults() {
    let out = twolevel(&["show-config", "--config", configs().join("variable_coefficient.json").to_str().unwrap()]);
    assert!(out.status.success());
    let json = text(&out.stdout);
    assert!(json.contains("\"cy\": 5.0") && json.contains("\"theta\": \"auto\"") && json.contains("\"strip_height\": 0.05"), "{json}");
}

#[test]
fn small_steady_study_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.json");
    std::fs::write(
        &cfg,
        r#"{"geometry": {"strip_height": 0.2}, "source": {"kind": "gaussian_flux", "amplitude": 50.0, "center": 0.4, "width": 0.02},
            "mesh": {"global_n": [5], "local_n": [10, 20], "reference_n": 20, "degree": 1}}"#,
    )
    .unwrap();
    let out = twolevel(&["steady", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--threads", "2"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("steady_h5.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(dir.path().join("steady_summary.csv").exists());
}

#[test]
fn consistency_study_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"geometry": {"strip_height": 0.2}, "source": {"kind": "gaussian_flux", "amplitude": 10.0, "center": 0.5, "width": 0.05}, "mesh": {"global_n": [5, 10], "degree": 1}}"#).unwrap();
    let out = twolevel(&["consistency-study", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("order"));
    let csv = std::fs::read_to_string(dir.path().join("consistency.csv")).unwrap();
    assert!(csv.starts_with("h,rel_l2_difference,order,local_vs_global,iterations\n"));
}
