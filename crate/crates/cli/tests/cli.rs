use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_algebroid-cc"))
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(format!("{name}.json"))
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn axioms_pass_on_so3() {
    let out = run(&["verify", &fixture("so3"), "--suite", "axioms"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["pass"], true);
    assert_eq!(r["tool"], "algebroid-cc");
    assert_eq!(r["seed"], 42);
    assert_eq!(r["points"], 100);
    let names: Vec<&str> = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    assert!(names.contains(&"axioms.so3.jacobi"));
}

#[test]
fn broken_jacobi_names_the_triple() {
    let out = run(&["verify", &fixture("broken_jacobi"), "--suite", "axioms"]);
    assert_eq!(out.status.code(), Some(1));
    let r = json(&out);
    let jacobi = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "axioms.so3_broken.jacobi")
        .unwrap();
    assert_eq!(jacobi["pass"], false);
    assert!(jacobi["max_residual"].as_f64().unwrap() >= 0.1);
    assert_eq!(jacobi["detail"], "worst triple (b1, b2, b3)");
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL axioms.so3_broken.jacobi"));
}

#[test]
fn classes_suite_includes_modular_check() {
    let out = run(&["verify", &fixture("solvable_abelian"), "--suite", "classes"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert!(r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["name"] == "classes.phi.mu_1_is_modular" && c["pass"] == true));
}

#[test]
fn mu_dumps_the_modular_form() {
    let out = run(&[
        "mu",
        &fixture("solvable_abelian"),
        "--morphism",
        "phi",
        "--h",
        "1",
        "--points",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let terms = r["dumps"][0]["terms"].as_array().unwrap();
    assert_eq!(terms.len(), 1);
    assert_eq!(terms[0]["index"], "b*1");
    assert_eq!(terms[0]["expression"], "1");
    assert_eq!(terms[0]["values"], serde_json::json!([1.0, 1.0, 1.0]));
}

#[test]
fn mu_on_so3_identity_is_zero() {
    let out = run(&["mu", &fixture("so3"), "--morphism", "id", "--h", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["dumps"][0]["degree"], 5);
    assert!(r["dumps"][0]["terms"].as_array().unwrap().is_empty());
}

#[test]
fn mu_on_sa3_is_a_nonzero_five_form() {
    let out = run(&[
        "mu",
        &fixture("sa3_zero"),
        "--morphism",
        "zero",
        "--h",
        "2",
        "--points",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["dumps"][0]["degree"], 5);
    assert!(!r["dumps"][0]["terms"].as_array().unwrap().is_empty());
}

#[test]
fn modular_command() {
    let out = run(&["modular", &fixture("solvable2d"), "--algebroid", "solvable"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["dumps"][0]["class"], "lambda");
    assert_eq!(r["dumps"][0]["terms"][0]["index"], "b*1");
}

#[test]
fn jet_command_writes_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("jet.json");
    let out = run(&[
        "jet",
        &fixture("solvable_abelian"),
        "--algebroid",
        "A",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(r["pass"], true);
    assert!(r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["name"] == "jet.A.phi.relative_is_pullback"));
}

#[test]
fn identities_command() {
    let out = run(&["identities", &fixture("chain")]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert!(r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["name"] == "composition.phi>psi.composition_relative"));
}

#[test]
fn usage_and_fixture_errors_exit_2() {
    assert_eq!(
        run(&["verify", &fixture("so3"), "--suite", "nope"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["verify", "missing.json", "--suite", "all"])
            .status
            .code(),
        Some(2)
    );
    let out = run(&["mu", &fixture("so3"), "--morphism", "nope", "--h", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown morphism `nope`"));
    assert_eq!(
        run(&["mu", &fixture("so3"), "--morphism", "id", "--h", "0"])
            .status
            .code(),
        Some(2)
    );

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"base": {"coords": ["x"]},
            "algebroids": {"A": {"basis": ["a"], "anchor": [["x", "1"]]}}}"#,
    )
    .unwrap();
    let out = run(&["verify", bad.to_str().unwrap(), "--suite", "axioms"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("algebroids.A.anchor[0]"));
}

#[test]
fn seed_changes_the_probes() {
    let a = run(&[
        "verify",
        &fixture("action"),
        "--suite",
        "axioms",
        "--seed",
        "1",
    ]);
    let b = run(&[
        "verify",
        &fixture("action"),
        "--suite",
        "axioms",
        "--seed",
        "2",
    ]);
    assert_eq!(json(&a)["seed"], 1);
    assert_ne!(a.stdout, b.stdout);
}
