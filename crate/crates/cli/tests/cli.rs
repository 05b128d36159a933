use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nullcover"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bias_set_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bias.json");
    let o = run(&["bias-set", "--eta", "1/3", "--m0", "10", "--d", "1", "-o", s(&out)]);
    assert_eq!(code(&o), 0);
    let v = read(&out);
    assert_eq!(v["schema"], "nullcover/1");
    let r = &v["results"][0];
    assert_eq!((r["params"]["k"].as_u64(), r["params"]["s"].as_u64(), r["params"]["m"].as_u64()), (Some(3), Some(2), Some(16)));
    assert!(r["bias"]["value"].as_f64().unwrap() < 0.25);
    assert_eq!(code(&run(&["verify", s(&out)])), 0);
    // only the temporary file's rename leaves the directory
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn bias_set_sweep_as_csv() {
    let o = run(&["bias-set", "--eta", "1/3,1/5", "--m0", "10,64", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("eta,m0,d,k,s,m,q"));
    assert_eq!(lines.len(), 5);
}

#[test]
fn tampered_bias_set_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bias.json");
    assert_eq!(code(&run(&["bias-set", "--eta", "1/3", "--m0", "10", "-o", s(&out)])), 0);
    let mut v = read(&out);
    v["results"][0]["set"]["members"].as_array_mut().unwrap().remove(0);
    std::fs::write(&out, v.to_string()).unwrap();
    assert_eq!(code(&run(&["verify", s(&out)])), 1);
}

#[test]
fn undersized_cover_member_names_the_threshold() {
    let o = run(&[
        "cover",
        "--N",
        "64",
        "--eps",
        "0.5",
        "--family",
        s(&config("undersized-family.json")),
        "--seed",
        "7",
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8(o.stderr).unwrap().contains("16.64"));
}

#[test]
fn cover_report_only_is_verified_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&a, &b] {
        let o = run(&[
            "cover",
            "--N",
            "64",
            "--eps",
            "1/2",
            "--family",
            s(&config("undersized-family.json")),
            "--seed",
            "7",
            "--report-only",
            "-o",
            s(p),
        ]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(read(&a)["certificate"]["seed"], 7);
    assert_eq!(code(&run(&["verify", s(&a)])), 0);
    let mut v = read(&a);
    v["set"]["members"] = serde_json::json!([[0]]);
    std::fs::write(&a, v.to_string()).unwrap();
    assert_eq!(code(&run(&["verify", s(&a)])), 1);
}

#[test]
fn rrp_trace_verifies_until_a_corner_moves() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&a, &b] {
        assert_eq!(code(&run(&["rrp", "--config", s(&config("rrp-identity.json")), "-o", s(p)])), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(code(&run(&["verify", s(&a)])), 0);

    let text = std::fs::read_to_string(&a).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    let corner = &mut v["levels"][1]["k_set"]["boxes"][0][0][0];
    *corner = serde_json::json!(corner.as_i64().unwrap() - 1);
    std::fs::write(&a, v.to_string()).unwrap();
    assert_eq!(code(&run(&["verify", s(&a)])), 1);
}

#[test]
fn rrp_seed_override_is_recorded() {
    let o = run(&["rrp", "--config", s(&config("rrp-identity.json")), "--seed", "99"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["config"]["seed"], 99);
}

#[test]
fn full_measure_trace_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fm.json");
    assert_eq!(code(&run(&["full-measure", "--config", s(&config("full-measure.json")), "-o", s(&out)])), 0);
    assert_eq!(code(&run(&["verify", s(&out)])), 0);
    let mut v = read(&out);
    v["levels"][1]["uncovered_pixels"] = serde_json::json!("1");
    std::fs::write(&out, v.to_string()).unwrap();
    assert_eq!(code(&run(&["verify", s(&out)])), 1);
}

#[test]
fn dimension_with_a_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dim.json");
    let digits: Vec<String> = (0..64).map(|i| (8 * i).to_string()).collect();
    let digits = digits.join(",");
    let o = run(&[
        "dimension", "--base", "512", "--digits", &digits, "--depth", "3", "--gauge", "power:0.5", "--eta", "1/2", "--schedule",
        "9,18,27", "-o", s(&out),
    ]);
    assert_eq!(code(&o), 0);
    let v = read(&out);
    assert_eq!(v["estimates"].as_array().unwrap().len(), 2);
    // dimension 2/3 is positive, so the log dimension is infinite
    assert_eq!(v["estimates"][0]["value"]["kind"], "infinite");
    assert_eq!(v["certificate"]["levels"].as_array().unwrap().len(), 3);
    assert_eq!(code(&run(&["verify", s(&out)])), 0);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&run(&["bias-set", "--eta", "one third", "--m0", "10"])), 2);
    assert_eq!(code(&run(&["bias-set", "--eta", "2/3", "--m0", "10"])), 2);
    assert_eq!(code(&run(&["cover", "--N", "64", "--eps", "1/2", "--family", "x.json"])), 2);
    assert_eq!(code(&run(&["verify", "/nonexistent/trace.json"])), 2);
    assert_eq!(code(&run(&["rrp", "--config", s(&config("rrp-identity.json")), "--format", "csv"])), 2);
}
