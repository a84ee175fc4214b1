use std::path::Path;
use std::process::{Command, Output};

use fpfunnel::record::Series;

fn fpfunnel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpfunnel")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn bundled(name: &str) -> String {
    format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// The bundled disturbed config cut to a short horizon.
fn short_config(dir: &Path, name: &str, disturbed: bool) -> String {
    let text = std::fs::read_to_string(bundled("paper_sec6_disturbed.cfg")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["name"] = name.into();
    v["solver"]["horizon"] = 0.5.into();
    v["solver"]["snapshots"] = serde_json::json!([0.0, 0.5]);
    if !disturbed {
        v.as_object_mut().unwrap().remove("disturbance");
    }
    let path = dir.join(format!("{name}.cfg"));
    std::fs::write(&path, v.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_records_and_passes_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short_config(tmp.path(), "short", true);
    let out = tmp.path().join("out");
    let o = fpfunnel(&["run", &cfg, "--backend", "all", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("PASS  funnel"), "{text}");
    assert!(text.contains("negative_density"), "{text}");
    assert!(!text.contains("FAIL"), "{text}");
    for b in ["spectral", "fd", "ode"] {
        assert!(out.join(b).join("meta.json").is_file());
        assert!(out.join(b).join("series.csv").is_file());
    }
    assert!(out.join("spectral/snapshots/t_00500.csv").is_file());
    assert!(out.join("compare_spectral_vs_fd.json").is_file());

    let check = fpfunnel(&["check", out.join("fd").to_str().unwrap()]);
    assert!(check.status.success(), "{}", stdout(&check));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short_config(tmp.path(), "repeat", true);
    let mut series = Vec::new();
    for i in 0..2 {
        let out = tmp.path().join(format!("out{i}"));
        let o = fpfunnel(&["run", &cfg, "--backend", "spectral", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        series.push(std::fs::read(out.join("spectral/series.csv")).unwrap());
    }
    assert_eq!(series[0], series[1]);
}

#[test]
fn malformed_config_fails_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "{\n  \"name\": \"bad\",\n  \"model\": {\"c\": 0.1, \"gamma\": [[1.0]], \"g\": {\"kind\": \"cubic\"}}\n}\n").unwrap();
    let out = tmp.path().join("out");
    let o = fpfunnel(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("model.g"), "{err}");
    assert!(err.contains("line 3"), "{err}");
    assert!(!out.exists());
}

#[test]
fn infeasible_start_is_reported_before_solving() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(bundled("paper_sec6_clean.cfg")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["initial"]["boxes"] = serde_json::json!([[2.0, 3.0]]);
    let cfg = tmp.path().join("far.cfg");
    std::fs::write(&cfg, v.to_string()).unwrap();
    let out = tmp.path().join("out");
    let o = fpfunnel(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("funnel"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn compare_identical_mismatched_and_failing() {
    let tmp = tempfile::tempdir().unwrap();
    let a = short_config(tmp.path(), "a", true);
    let b = short_config(tmp.path(), "b", false);
    let root = tmp.path().join("runs");
    let o = fpfunnel(&["run", &a, &b, "--backend", "spectral", "--out", root.to_str().unwrap(), "--jobs", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ra = root.join("a/spectral");
    let rb = root.join("b/spectral");

    let report = tmp.path().join("self.json");
    let o = fpfunnel(&["compare", ra.to_str().unwrap(), ra.to_str().unwrap(), "--report", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["mean_gap"], 0.0);
    assert_eq!(json["mass_gap"], 0.0);

    let o = fpfunnel(&["compare", ra.to_str().unwrap(), rb.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("scenario"), "{}", stderr(&o));

    // a funnel breach injected into the stored series makes `check` fail
    let series_path = ra.join("series.csv");
    let mut s = Series::parse_csv(&std::fs::read_to_string(&series_path).unwrap()).unwrap();
    s.funnel[100] = 1.5;
    std::fs::write(&series_path, s.to_csv()).unwrap();
    let o = fpfunnel(&["check", ra.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL  funnel"), "{}", stdout(&o));
    assert!(stdout(&o).contains("first violation at t = 0.1"), "{}", stdout(&o));
}
