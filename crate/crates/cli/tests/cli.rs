use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lambdaflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lambdaflow")).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, scenario: &str, extra: &[&str]) -> Output {
    let out = dir.join("out");
    let mut args = vec!["run", scenario, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    lambdaflow(&args)
}

fn config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn unknown_scenario_exits_2_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "heat2d", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("heat2d"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    for (text, key) in [
        ("[solver]\nepsilon = 0.1\nh = 0.2\n", "solver.h"),
        ("[domain]\ndim = 2\n[solver]\nj = 4\n", "solver.j"),
        ("[solver]\nepsilon = \"small\"\n", "epsilon"),
        ("[solver]\nspeed = 3\n", "speed"),
    ] {
        let cfg = config(dir.path(), text);
        let o = run_in(dir.path(), "heat1d", &["--config", &cfg]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(key), "{text}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!dir.path().join("out").exists());
    }
}

#[test]
fn missing_config_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "heat1d", &["--config", "/nonexistent/cfg.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn heat1d_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "heat1d", &["--seed", "7", "--levels", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let out = dir.path().join("out");
    let fields: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("field_t"))
        .collect();
    assert_eq!(fields.len(), 3);
    let csv = fs::read_to_string(out.join("field_t0.csv")).unwrap();
    assert!(csv.starts_with("x1,kind,value\n"));
    let decay = fs::read_to_string(out.join("decay.csv")).unwrap();
    assert!(decay.starts_with("t,sup_gap\n"));
    assert!(decay.lines().count() > 10);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["config"]["epsilon"], 0.02);
    assert_eq!(meta["config"]["dim"], 1);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["checks"].as_array().unwrap().len() >= 3);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert_eq!(run_in(d.path(), "halfspace", &["--seed", "3"]).status.code(), Some(0));
    }
    let mut names: Vec<_> = fs::read_dir(a.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 3);
    for n in names {
        assert_eq!(fs::read(a.path().join("out").join(&n)).unwrap(), fs::read(b.path().join("out").join(&n)).unwrap());
    }
}

#[test]
fn non_convergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[solver]\nmax_sweeps = 3\nresolution = 12\n");
    let o = run_in(dir.path(), "disk-envelope", &["--config", &cfg]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn list_names_every_scenario() {
    let o = lambdaflow(&["list"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 8);
}
