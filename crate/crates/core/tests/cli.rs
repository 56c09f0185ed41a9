use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn specs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("specs")
}

fn frontlim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frontlim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn spec_arg(name: &str) -> String {
    specs().join(name).to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_default_model_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = frontlim(&["validate"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["passed"] == true));
}

#[test]
fn rd_run_rejects_a_step_above_the_cfl_bound() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_arg("rd_front_speed.toml");
    let o = frontlim(&["rd-run", "--spec", &spec, "--override", "solver.dt=0.01"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("CFL") && msg.contains("bound"), "{msg}");
    // nothing was computed
    assert!(!dir.path().join("index.csv").exists());
}

#[test]
fn converge_reports_decreasing_distances() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_arg("refraction_1d.toml");
    let o = frontlim(&["converge", "--spec", &spec, "--jobs", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["label"], "empirical half-limits");
    assert!(report["strictly_decreasing"].as_array().unwrap().iter().all(|b| b == true));
    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("epsilon,h,t,hausdorff,plus_fraction,minus_fraction\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 3);
}

#[test]
fn identical_specs_give_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let spec = spec_arg("monotone.toml");
    for d in [&a, &b] {
        let o = frontlim(&["rd-run", "--spec", &spec], d.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 2);
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn level_set_runs_write_an_index() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_arg("shrinking_circle.toml");
    let o = frontlim(&["hj-run", "--spec", &spec, "--override", "grid.n=60"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let index = fs::read_to_string(dir.path().join("index.csv")).unwrap();
    let rows: Vec<&str> = index.lines().collect();
    assert_eq!(rows[0], "t,path,front_point_count");
    assert_eq!(rows.len(), 1 + 3);
    for row in &rows[1..] {
        let cols: Vec<&str> = row.split(',').collect();
        assert!(dir.path().join(cols[1]).is_file());
        assert!(cols[2].parse::<usize>().unwrap() > 0);
    }
    // no temporary files left behind
    assert!(fs::read_dir(dir.path())
        .unwrap()
        .all(|e| !e.unwrap().file_name().to_string_lossy().starts_with('.')));
}

#[test]
fn arrival_takes_seed_and_model_flags() {
    let dir = tempfile::tempdir().unwrap();
    let model = specs().join("default_model.toml");
    let spec_dir = tempfile::tempdir().unwrap();
    let spec = spec_dir.path().join("arrival.toml");
    fs::write(&spec, "[experiment]\nname = \"a\"\n[grid]\nlower = [-1.0, -1.0]\nupper = [1.0, 1.0]\nn = 40\n").unwrap();
    let o = frontlim(
        &[
            "arrival",
            "--spec",
            spec.to_str().unwrap(),
            "--model",
            model.to_str().unwrap(),
            "--seed",
            "point:0,0",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("arrival.field").is_file());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["unreached"], 0);
}

#[test]
fn spec_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = frontlim(&["hj-run", "--spec", "/nonexistent/spec.toml"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    let spec = spec_arg("shrinking_circle.toml");
    let bad_key = frontlim(&["hj-run", "--spec", &spec, "--override", "solver.nonsense=1"], dir.path());
    assert_eq!(bad_key.status.code(), Some(2));
    assert!(stderr(&bad_key).contains("nonsense"));
    let bad_expr = frontlim(&["hj-run", "--spec", &spec, "--override", "experiment.initial=\"1 - \""], dir.path());
    assert_eq!(bad_expr.status.code(), Some(2));
    let no_spec = frontlim(&["rd-run"], dir.path());
    assert_eq!(no_spec.status.code(), Some(2));
}
