use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn eks(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eks")).args(args).output().expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("eks-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write_gen(name: &str, args: &[&str]) -> String {
    let path = tmp(name);
    let p = path.to_str().unwrap().to_string();
    let mut full = vec!["gen"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", &p]);
    let out = eks(&full);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    p
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

#[test]
fn gen_is_deterministic() {
    let args = ["gen", "--ring", "5,2", "--r", "1", "--s", "2", "--profile", "generic", "--seed", "7"];
    let a = eks(&args);
    let b = eks(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["kind"], "selmer_instance");
    assert_eq!(v["primes"].as_array().unwrap().len(), 2);
}

#[test]
fn gen_without_primes() {
    let v = json(&eks(&["gen", "--ring", "5,2", "--r", "2", "--s", "0", "--seed", "1"]));
    assert!(v["primes"].as_array().unwrap().is_empty());
    assert_eq!(v["r"], 2);
}

#[test]
fn gen_rejects_bad_input() {
    assert_eq!(eks(&["gen", "--ring", "5", "--r", "1"]).status.code(), Some(2));
    assert_eq!(eks(&["gen", "--ring", "5,2", "--r", "1", "--profile", "nope"]).status.code(), Some(2));
    assert_eq!(eks(&["gen", "--ring", "5,2", "--r", "1", "--s", "1", "--M", "7"]).status.code(), Some(2));
}

#[test]
fn verify_stark_suite_passes() {
    let inst = write_gen("stark.json", &["--ring", "5,2", "--r", "1", "--s", "3", "--seed", "3"]);
    let out = eks(&["verify", &inst, "--suite", "stark"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["summary"]["fail"], 0);
    assert!(v["summary"]["pass"].as_u64().unwrap() > 0);
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["suite"] == "stark"));
}

#[test]
fn corrupted_stark_component_fails() {
    let inst = write_gen("corrupt-inst.json", &["--ring", "5,2", "--r", "1", "--s", "2", "--seed", "4"]);
    let der = eks(&["derive", &inst]);
    assert_eq!(der.status.code(), Some(0));
    let mut v = json(&der);
    let x = &mut v["stark"][0]["values"][0][0];
    *x = Value::from((x.as_u64().unwrap() + 1) % 25);
    let path = tmp("corrupt-der.json");
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    let out = eks(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let rep = json(&out);
    let failed: Vec<&Value> = rep["checks"].as_array().unwrap().iter().filter(|c| c["status"] == "fail").collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().any(|c| c.get("witness").is_some()));
}

#[test]
fn empty_suite_selection() {
    let inst = write_gen("empty.json", &["--ring", "5,2", "--r", "1", "--s", "1", "--seed", "5"]);
    let out = eks(&["verify", &inst, "--suite", ""]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["checks"].as_array().unwrap().is_empty());
}

#[test]
fn unparseable_artifact_exits_2() {
    let path = tmp("garbage.json");
    std::fs::write(&path, "{ not json").unwrap();
    assert_eq!(eks(&["verify", path.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(eks(&["verify", "/nonexistent/eks.json"]).status.code(), Some(2));
}

#[test]
fn derive_fs_consistent_pipeline() {
    let art = write_gen("fs.json", &["--ring", "5,3", "--r", "2", "--s", "2", "--M", "25", "--profile", "fs-consistent", "--seed", "1"]);
    let out = eks(&["derive", &art, "--M", "25"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["kind"], "euler_derivation");
    let verdicts = v["verdicts"].as_array().unwrap();
    for name in ["derive.i0_equals_base_image", "derive.kappa_is_kolyvagin", "derive.ideals_in_fitting"] {
        assert!(verdicts.iter().any(|c| c["name"] == name && c["status"] == "pass"), "{name}");
    }
    let rep = eks(&["verify", &art, "--suite", "euler"]);
    assert_eq!(rep.status.code(), Some(0));
}

#[test]
fn derive_zero_system_and_mismatched_modulus() {
    let art = write_gen("zero.json", &["--ring", "5,2", "--r", "1", "--s", "2", "--M", "5", "--profile", "zero", "--seed", "1"]);
    let v = json(&eks(&["derive", &art]));
    for row in v["kolyvagin_ideals"].as_array().unwrap() {
        assert!(row["ideal"]["generators"].as_array().unwrap().is_empty());
    }
    assert_eq!(eks(&["derive", &art, "--M", "25"]).status.code(), Some(2));
}

#[test]
fn graph_examples() {
    let g = write_gen("g-generic.json", &["--ring", "5,2", "--r", "1", "--s", "3", "--seed", "2"]);
    let dot = String::from_utf8(eks(&["graph", &g]).stdout).unwrap();
    assert!(dot.starts_with("graph core {"));
    assert!(dot.contains("connected=true"));
    assert!(dot.contains(" -- "));
    let d = write_gen("g-degenerate.json", &["--ring", "5,2", "--r", "1", "--s", "2", "--profile", "degenerate", "--seed", "2"]);
    let dot = String::from_utf8(eks(&["graph", &d]).stdout).unwrap();
    assert!(!dot.contains(" -- "));
    assert!(dot.contains("style=dashed") || dot.contains("color=red"));
    let z = write_gen("g-empty.json", &["--ring", "5,2", "--r", "1", "--s", "0", "--seed", "2"]);
    let dot = String::from_utf8(eks(&["graph", &z]).stdout).unwrap();
    assert!(dot.contains("\"1\" [label="));
    assert!(!dot.contains(" -- "));
}

#[test]
fn report_summarizes() {
    let inst = write_gen("rep-inst.json", &["--ring", "5,2", "--r", "1", "--s", "2", "--seed", "6"]);
    let rp = tmp("rep.json");
    let out = eks(&["verify", &inst, "--suite", "selmer,stark", "--out", rp.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let sum = eks(&["report", rp.to_str().unwrap()]);
    assert_eq!(sum.status.code(), Some(0));
    assert_eq!(json(&sum)["kind"], "report_summary");
}
