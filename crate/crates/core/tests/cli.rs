use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_musielak"))
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn check_nfunction_power_two_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("check-nfunction", &config_path("check_power.json"), dir.path(), &["--tolerance-profile", "strict"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert_eq!(r["passed"], true);
    assert!(r["results"]["biconjugate"]["relative"].as_f64().unwrap() <= 1e-8);
    assert_eq!(r["tolerance_profile"], "strict");
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn heat_solve_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("solve", &config_path("heat.json"), dir.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert!(r["results"]["l2_error"].as_f64().unwrap() <= 1e-6);
    for f in ["trajectory.csv", "fields_u.csv", "fields_grad_u.csv", "fields_flux.csv"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next().unwrap(), "t,c_1,c_2,c_3,c_4");
}

#[test]
fn empty_config_lists_missing_keys() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("solve", &config_path("empty.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for key in ["domain", "graph", "solver"] {
        assert!(err.contains(key), "{err}");
    }
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn bad_value_names_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"boundary": {"domain": {"kind": "disk", "radius": "one"}, "deltas": [0.1]}}"#).unwrap();
    let o = run("boundary", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("boundary.domain"));
}

#[test]
fn module_errors_name_the_module() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    std::fs::write(
        &cfg,
        r#"{"domain": {"t_len": 0.1, "omega": {"kind": "interval", "length": 1}, "nt": 8, "nx": 32},
            "graph": {"kind": "power", "p": 2},
            "solver": {"u0": "sin(pi*x)", "eps": [0.1], "n": [4]}}"#,
    )
    .unwrap();
    let o = run("sweep", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("solver"));
}

#[test]
fn failing_check_gives_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("heat_bad.json");
    std::fs::write(
        &cfg,
        r#"{"domain": {"t_len": 0.1, "omega": {"kind": "interval", "length": 1}, "nt": 8, "nx": 64},
            "graph": {"kind": "linear", "slope": 1, "nfunction": {"kind": "power_normalized", "p": 2}},
            "solver": {"u0": "sin(pi*x)", "exact": "sin(pi*x)", "eps": [0.05], "n": [4], "t_end": 0.1, "dt": 1e-3}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run("solve", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(report(&out)["checks"]["l2_error"], false);
}

#[test]
fn artifacts_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = run("graph", &config_path("graph_jump.json"), dir.path(), &["--seed", "42"]);
        assert!(o.status.success());
    }
    for f in ["report.json", "phi.csv", "selection.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    assert_eq!(report(a.path())["seed"], 42);
}

#[test]
fn every_shipped_config_passes() {
    let cases = [
        ("norms", "norms.json"),
        ("boundary", "boundary.json"),
        ("mollify", "mollify.json"),
        ("solve", "minty_jump.json"),
        ("sweep", "sweep_power.json"),
    ];
    for (sub, cfg) in cases {
        let dir = tempfile::tempdir().unwrap();
        let o = run(sub, &config_path(cfg), dir.path(), &[]);
        assert!(o.status.success(), "{sub} {cfg}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(report(dir.path())["passed"], true);
    }
}
