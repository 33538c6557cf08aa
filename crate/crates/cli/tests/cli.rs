use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn declab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_declab")).args(args).output().expect("binary runs")
}

fn problems() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

fn prob(name: &str) -> String {
    problems().join(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn unmatched_gallery_filter_is_an_empty_pass() {
    let o = declab(&["gallery", "nothing-here", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["rows"].as_array().unwrap().len(), 0);
}

#[test]
fn gallery_reports_are_byte_identical_for_a_seed() {
    let a = declab(&["gallery", "E3.2", "--json", "--seed", "7"]);
    let b = declab(&["gallery", "E3.2", "--json", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn listing_an_unknown_case_is_an_error() {
    let o = declab(&["gallery", "--list", "E9.9"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown gallery case"));
}

#[test]
fn parse_errors_carry_positions() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.prob");
    std::fs::write(&p, "[function]\nf1 = x if x < else 1\n").unwrap();
    let o = declab(&["decouple", "--problem", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2, column 15"), "{err}");
}

#[test]
fn failing_certificate_exits_one() {
    let o = declab(&["certify", "--problem", &prob("pole.prob"), "--property", "uniform"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("witness"));
}

#[test]
fn set_pair_certificate_holds() {
    let o = declab(&["certify", "--problem", &prob("parabola.prob"), "--property", "firm-uniform", "--pair", "P", "H", "--levels", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn decouple_writes_report_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (rep, tr) = (dir.path().join("r.json"), dir.path().join("t.csv"));
    let o = declab(&[
        "decouple",
        "--problem",
        &prob("step.prob"),
        "--report",
        rep.to_str().unwrap(),
        "--trace",
        tr.to_str().unwrap(),
    ]);
    assert!(matches!(o.status.code(), Some(0) | Some(2)));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(v["result"]["lambda_dag"], 1.0);
    let csv = std::fs::read_to_string(&tr).unwrap();
    assert!(csv.starts_with("label,level,param,value,samples\n"));
    assert!(csv.lines().count() > 5);
}

#[test]
fn fuzzy_rules_find_exact_witnesses() {
    let p = prob("parabola.prob");
    for args in [
        vec!["multiplier", "--problem", &p, "--at", "0,0", "--eps", "0.1", "--delta", "0.1", "--eta", "0.1", "--json"],
        vec!["intersect", "--problem", &p, "--sets", "P", "H", "--at", "0,0", "--xstar", "1,0", "--eps", "0.25", "--json"],
    ] {
        let o = declab(&args);
        assert_eq!(o.status.code(), Some(0));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["result"]["outcome"], "found");
        assert_eq!(v["result"]["residual"], 0.0);
    }
}

#[test]
fn chain_rule_through_a_linear_map() {
    let o = declab(&["chain", "--problem", &prob("chain.prob"), "--map", "F", "--at", "0,0", "--xstar", "0.5,1", "--eps", "0.1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn control_solve_and_check() {
    let inst = problems().join("control.json");
    let o = declab(&["control", "solve", "--instance", inst.to_str().unwrap(), "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["solution"]["xopt"], serde_json::json!([0.0, 0.0, 1.0, 0.0]));
    let o = declab(&["control", "check", "--instance", inst.to_str().unwrap(), "--x=0,-0.5,1,0"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}

#[test]
fn ekeland_on_a_csv_cloud() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.csv");
    std::fs::write(&p, "# x, y, value\n0,0,1\n1,0,0.2\n0,1,inf\n0.5,0.5,0.9\n").unwrap();
    let o = declab(&["ekeland", "--cloud", p.to_str().unwrap(), "--eps", "0.5", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["xhat"], serde_json::json!([1.0, 0.0]));
}

#[test]
fn subgradient_membership() {
    let p = prob("parabola.prob");
    let o = declab(&["subdiff", "--problem", &p, "--at=0.5,0.25", "--xstar=0,-1"]);
    assert_eq!(o.status.code(), Some(0));
    let o = declab(&["subdiff", "--problem", &p, "--at=0.5,0.25", "--xstar=0,1"]);
    assert_eq!(o.status.code(), Some(1));
}
