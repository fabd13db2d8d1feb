use std::path::PathBuf;
use std::process::Command;

use cym_core::harness::Report;

fn cym() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cym"))
}

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run_to(scenario: &std::path::Path, out: &std::path::Path) -> i32 {
    cym().arg("run").arg(scenario).arg("--out").arg(out).status().unwrap().code().unwrap()
}

fn read_report(path: &std::path::Path) -> Report {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn einstein_sphere_scenario_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    assert_eq!(run_to(&bundled("theorem_main_s6.json"), &out), 0);
    let r = read_report(&out);
    assert_eq!(r.order, 6);
    assert!(r.checks.iter().all(|c| c.pass));
}

#[test]
fn invariance_scenario_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    assert_eq!(run_to(&bundled("invariance_k_d6.json"), &out), 0);
}

#[test]
fn reports_are_deterministic_modulo_timing() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    run_to(&bundled("euclid.json"), &a);
    run_to(&bundled("euclid.json"), &b);
    let strip = |p: &std::path::Path| {
        let mut r = read_report(p);
        r.checks.iter_mut().for_each(|c| c.ms = 0);
        serde_json::to_string(&r).unwrap()
    };
    assert_eq!(strip(&a), strip(&b));
    let names: Vec<_> = read_report(&a).checks.into_iter().map(|c| c.name).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let zero_tol = write(
        "zero.json",
        r#"{"name":"z","paper_ref":"forced failure","seed":1,"checks":[{"name":"euclid_cym_vanishes","tolerance":0.0},{"name":"diag_sphere_scale_tractor","tolerance":0.0}]}"#,
    );
    let out = dir.path().join("zero_report.json");
    assert_eq!(run_to(&zero_tol, &out), 1);
    let r = read_report(&out);
    assert!(r.checks.iter().all(|c| c.residual.is_some()));
    assert!(r.checks.iter().any(|c| !c.pass));

    let bad = write("bad.json", "{ \"name\": ");
    assert_eq!(run_to(&bad, &dir.path().join("x.json")), 2);
    let unknown = write("unknown.json", r#"{"name":"u","paper_ref":"p","seed":1,"checks":[{"name":"no_such_check"}]}"#);
    assert_eq!(run_to(&unknown, &dir.path().join("x.json")), 2);
    let exhausted =
        write("low.json", r#"{"name":"l","paper_ref":"p","seed":1,"order":2,"checks":[{"name":"kappa_closed_form"}]}"#);
    assert_eq!(run_to(&exhausted, &dir.path().join("x.json")), 3);
}

#[test]
fn order_flag_overrides_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let status = cym()
        .env("CYM_JET_ORDER", "2")
        .args(["run", bundled("euclid.json").to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    let status = cym()
        .env("CYM_JET_ORDER", "2")
        .args(["run", bundled("euclid.json").to_str().unwrap(), "--order", "4", "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(read_report(&out).order, 4);
}

#[test]
fn check_subcommand() {
    let out = cym()
        .args(["check", "euclid_current", "--metric", "flat,n=6", "--conn", "euclid_gauge,lambda=0:1:0:0:0:0", "--seed", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["residual"].as_f64().unwrap() <= 1e-10);
    let failed = cym().args(["check", "diag_sphere_scale_tractor", "--tol=0", "--points", "2"]).status().unwrap();
    assert_eq!(failed.code(), Some(1));
    assert_eq!(cym().args(["check", "nonexistent"]).status().unwrap().code(), Some(2));
}

#[test]
fn eval_euclid_current() {
    let out = cym()
        .args(["eval", "euclid_gauge", "--params", "lambda=1:0:0:0:0:0", "--at", "0.1,0.2,-0.3,0,0.1,0.2", "--field", "ym_current", "--order", "2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let vals: Vec<f64> = serde_json::from_value(v["field"]["values"].clone()).unwrap();
    assert_eq!(vals.len(), 6);
    assert!((vals[0] + 5.0).abs() < 1e-12);
    assert!(vals[1..].iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn eval_rejects_bad_input() {
    let bad_point = cym().args(["eval", "hyperbolic,n=3", "--at", "0,0,-1"]).status().unwrap();
    assert_eq!(bad_point.code(), Some(3));
    let unknown = cym().args(["eval", "torus", "--at", "0,0"]).status().unwrap();
    assert_eq!(unknown.code(), Some(2));
    let list = cym().arg("list").output().unwrap();
    let text = String::from_utf8(list.stdout).unwrap();
    assert!(text.contains("g6_example") && text.contains("tractor_bianchi"));
}
