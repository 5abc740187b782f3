use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn wanelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wanelab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn config(experiment: &str, model: &str, out: &Path, extra: &str) -> String {
    format!(
        r#"{{"version":"wanelab/1","experiment":"{experiment}","model":"{model}",
            "output_dir":"{}","schedule":{{"count":6}},"steps":256{extra}}}"#,
        out.display()
    )
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn flat_wane_group_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "c.json", &config("wane_group", "flat_torus_bundle", &out, ""));
    let o = wanelab(&["run", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let line = stdout(&o);
    assert!(line.starts_with("experiment=wane_group model=flat_torus_bundle verdict=PASS key_metric="), "{line}");
    let key: f64 = line.trim().rsplit('=').next().unwrap().parse().unwrap();
    assert!(key < 1e-3);

    let json: Value = serde_json::from_str(&fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    assert_eq!(json["verdict"], "PASS");
    assert_eq!(json["schedule"]["eps"].as_array().unwrap().len(), 6);
    assert_eq!(json["builtin_models_hash"].as_str().unwrap().len(), 64);
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("eps,coupling_norm,hh_ortho_residual,"), "{csv}");
    assert!(!out.join(".results.json.tmp").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let cfg = write_config(tmp.path(), "c.json", &config("shrink_holonomy", "trivial_su2", dir, r#","seed":11"#));
        assert!(wanelab(&["run", &cfg]).status.success());
    }
    let read = |d: &Path| fs::read(d.join("results.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(fs::read(a.join("results.csv")).unwrap(), fs::read(b.join("results.csv")).unwrap());
}

#[test]
fn command_line_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let (first, moved) = (tmp.path().join("first"), tmp.path().join("moved"));
    let cfg = write_config(tmp.path(), "c.json", &config("collapse_limit", "hopf", &first, ""));
    let dir = moved.to_str().unwrap();
    let o = wanelab(&["run", &cfg, "--output-dir", dir, "--seed", "5", "--steps", "512"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!first.exists());
    let json: Value = serde_json::from_str(&fs::read_to_string(moved.join("results.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 5);
    assert_eq!(json["steps"], 512);

    let o = wanelab(&["run", &cfg, "--steps", "8"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_config_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let body = format!(
        r#"{{"version":"wanelab/1","experiment":"wane_group","model":"hopf","output_dir":"{}","schedule":{{"count":0}}}}"#,
        out.display()
    );
    let cfg = write_config(tmp.path(), "bad.json", &body);
    for cmd in ["run", "validate"] {
        let o = wanelab(&[cmd, &cfg]);
        assert_eq!(o.status.code(), Some(1));
        assert!(String::from_utf8_lossy(&o.stderr).contains("schedule.count"));
    }
    assert!(!out.exists());
    assert_eq!(wanelab(&["run", "/nonexistent/config.json"]).status.code(), Some(1));
    assert_eq!(wanelab(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    // A connection this strong cannot be resolved by 32 steps.
    let bundle = r#"{"format":"wanelab-bundle/1","name":"stiff","group":"torus:1","base_dim":2,
        "domain":{"lo":[-1,-1],"hi":[1,1]},
        "curvature":[{"a":0,"i":0,"j":1,"poly":[{"coef":-5000.0,"powers":[0,0]}]}],
        "connection":[{"a":0,"i":1,"poly":[{"coef":10000.0,"powers":[1,0]}]}]}"#;
    let bundle_path = write_config(tmp.path(), "stiff.json", bundle);
    let out = tmp.path().join("out");
    let body = format!(
        r#"{{"version":"wanelab/1","experiment":"collapse_limit","model":"file:{bundle_path}",
            "output_dir":"{}","steps":32,"schedule":{{"count":3}}}}"#,
        out.display()
    );
    let cfg = write_config(tmp.path(), "c.json", &body);
    let o = wanelab(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.join("results.json").exists());
}

#[test]
fn validate_prints_the_filled_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"version":"wanelab/1","experiment":"fiber_gh","model":"trivial_su2"}"#);
    let o = wanelab(&["validate", &cfg]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schedule"]["count"], 13);
    assert_eq!(v["tolerances"]["gh_bound"], 0.15);
}

#[test]
fn list_models_names_every_builtin() {
    let o = wanelab(&["list-models"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["flat_torus_bundle", "hopf", "chern_torus:F", "trivial_su2", "builtin_models_hash="] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn projection_gap_experiment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("gap");
    let cfg = write_config(tmp.path(), "c.json", &config("paramdepd_gap", "hopf", &out, ""));
    let o = wanelab(&["run", &cfg]);
    assert!(stdout(&o).contains("verdict=PASS"), "{}", stdout(&o));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().next().unwrap().ends_with("n,gap_bounded,gap_unbounded"));
}
