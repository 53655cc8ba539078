use std::fs;
use std::path::Path;

use magdrift::cli;
use serde_json::Value;

fn run(dir: &Path, command: &str, config: &str) -> (i32, Value) {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let code = cli::run(command, &cfg, Some(&out));
    let manifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    (code, manifest)
}

#[test]
fn unknown_command_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, manifest) = run(tmp.path(), "fly", r#"{"command":"fly"}"#);
    assert_eq!(code, 2);
    assert!(manifest["status"].as_str().unwrap().contains("unknown command"));
    assert_eq!(manifest["exit_code"], 2);
}

#[test]
fn unknown_key_and_missing_file() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _) = run(tmp.path(), "count", r#"{"command":"count","model":"ex-13-6-41","colour":1}"#);
    assert_eq!(code, 2);
    let code = cli::run("count", &tmp.path().join("absent.json"), Some(&tmp.path().join("o")));
    assert_eq!(code, 2);
}

#[test]
fn lattice_count_row() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, manifest) =
        run(tmp.path(), "count", r#"{"command":"count","model":"ex-13-6-41","mu":10,"h":0.1,"tau":1,"kind":"pauli"}"#);
    assert_eq!(code, 0, "{manifest}");
    assert_eq!(manifest["summary"]["n_exact"], 125);
    let csv = fs::read_to_string(tmp.path().join("out/counts.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "mu,h,tau,kind,n_exact,n_approx,remainder,method_exact,method_approx");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[4], "125");
    assert_eq!(row[7], "lattice");
    assert!(manifest.get("wall_time_s").is_none());
}

#[test]
fn record_timing_adds_wall_time() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, manifest) =
        run(tmp.path(), "count", r#"{"command":"count","model":"ex-13-6-41","mu":4,"h":0.25,"tau":1,"record_timing":true}"#);
    assert_eq!(code, 0);
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn count_rejects_unsupported_model() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, manifest) = run(tmp.path(), "count", r#"{"command":"count","model":"ex-13-6-36"}"#);
    assert_eq!(code, 2, "{manifest}");
}

#[test]
fn guiding_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, manifest) = run(
        tmp.path(),
        "guiding",
        r#"{"command":"guiding","model":"ex-13-6-3-i","mu":32,"h":0.01,"x0":[0,-1],"p0":[1,0],"t_end":1.2}"#,
    );
    assert_eq!(code, 0, "{manifest}");
    let s = &manifest["summary"];
    let pi = std::f64::consts::PI;
    assert!((s["period_meas"].as_f64().unwrap() - pi / 32.0).abs() < 1e-8);
    assert!((s["drift_speed_meas"].as_f64().unwrap() * 32.0 - 1.0).abs() < 0.05);
    for f in ["trajectory.csv", "guiding.csv", "guiding.json"] {
        assert!(tmp.path().join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn action_csv_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, manifest) =
        run(tmp.path(), "action", r#"{"command":"action","model":"ex-13-6-34-i","tau":1,"grid":4,"r":[0.1]}"#);
    assert_eq!(code, 0, "{manifest}");
    let csv = fs::read_to_string(tmp.path().join("out/action.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x1,x2,r,eta,T,deta1,deta2,h11,h12,h22,flags");
    assert_eq!(csv.lines().count(), 1 + 25);
}

#[test]
fn horizontal_field_fails_with_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, manifest) = run(tmp.path(), "action", r#"{"command":"action","model":"ex-13-6-36","grid":2,"r":[0]}"#);
    assert_eq!(code, 1, "{manifest}");
}

#[test]
fn check_and_drift_line() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, manifest) = run(tmp.path(), "check", r#"{"command":"check","model":"ex-13-6-34-ii","grid":8}"#);
    assert_eq!(code, 0, "{manifest}");
    assert!(manifest["summary"]["solenoidal_residual"].as_f64().unwrap() <= 1e-10);

    let (code, manifest) =
        run(tmp.path(), "driftline", r#"{"command":"driftline","model":"ex-13-6-3-ii","x0":[1,0],"t_end":3}"#);
    assert_eq!(code, 0, "{manifest}");
    assert!(manifest["summary"]["level_spread"].as_f64().unwrap() < 1e-8);
}

#[test]
fn lattice_sweep_command() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, manifest) =
        run(tmp.path(), "sweep", r#"{"command":"sweep","template":"lattice","tau":0.9,"params":{"k":1,"l":1}}"#);
    assert_eq!(code, 0, "{manifest}");
    assert_eq!(manifest["summary"]["verdict"], "pass");
    let csv = fs::read_to_string(tmp.path().join("out/counts.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, r#"{"command":"billiard","model":"ex-13-7-12","params":{"slope":0.2},"mu":10,"n_reflections":5,"seed":1}"#)
        .unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(cli::run("billiard", &cfg, Some(&a)), 0);
    assert_eq!(cli::run("billiard", &cfg, Some(&b)), 0);
    for f in ["events.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
