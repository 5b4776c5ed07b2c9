use std::process::{Command, Output};

fn pdmsym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdmsym")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn commute_dilation_translation() {
    let o = pdmsym(&["commute", "--A", "D", "--B", "P3"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["commutator"], "d3");
    assert_eq!(v["generators"], "i*P3");
}

#[test]
fn verify_separable_row() {
    let o = pdmsym(&["verify", "--table", "2", "--item", "14"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["summary"]["verified"], 9);
    assert_eq!(v["summary"]["discrepant"], 0);
    for r in v["reports"].as_array().unwrap() {
        assert_eq!(r["integrals"].as_array().unwrap().len(), 3);
    }
}

#[test]
fn discrepant_anchor_exits_one() {
    let o = pdmsym(&["verify", "--table", "1", "--item", "2", "--pretty"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("anchor rows not verified: T1.2"));
}

#[test]
fn parse_error_exits_two() {
    let o = pdmsym(&["commute", "--A", "P1 +", "--B", "P2"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("parse error"));
    assert!(err.contains('^'));
    let o = pdmsym(&["find", "--f", "x3^", "--V", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = pdmsym(&["verify", "--table", "2", "--item", "8", "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn bindings_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.json");
    std::fs::write(&path, r#"{"T1.5": [{"slots": {"F": "sin(phi)"}}]}"#).unwrap();
    let o = pdmsym(&["verify", "--table", "1", "--item", "5", "--bindings", path.to_str().unwrap()]);
    let v = json(&o);
    assert_eq!(v["reports"].as_array().unwrap().len(), 1);
    assert_eq!(v["reports"][0]["binding"]["F"], "sin(phi)");
    assert_eq!(v["reports"][0]["integrals"][0]["verdict"]["verdict"], "Verified");
}

#[test]
fn catalog_listing() {
    let o = pdmsym(&["catalog", "list"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["rows"].as_array().unwrap().len(), 28);
    assert_eq!(v["rows"].as_array().unwrap().iter().filter(|r| r["anchor"] == true).count(), 10);
}

#[test]
fn killing_family_tensor() {
    let o = pdmsym(&["killing", "--family", "3", "--params", "l3_11=2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert!(v["certificate"]["verdict"] == "ExactZero" || v["certificate"]["verdict"] == "ProbablyZero");
    assert_eq!(pdmsym(&["killing", "--family", "12"]).status.code(), Some(2));
}

#[test]
fn find_sphere_mass() {
    let o = pdmsym(&["find", "--f", "r^2", "--V", "c*r^2/x3^2", "--degrees", "2", "--pretty"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("{L1,L2}"), "{text}");
    assert!(text.contains("L3^2"));
}

#[test]
fn precision_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_pdmsym"))
        .args(["verify", "--table", "2", "--item", "15"])
        .env("PDMSYM_PRECISION", "80")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(json(&o)["precision"], 80);
}
