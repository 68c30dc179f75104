use std::path::PathBuf;

use kaehler_liouville::cli::{run_captured, EXIT_IO, EXIT_OK, EXIT_VALIDATION};
use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("klm-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn diamond_is_rejected() {
    let (code, out, err) = run_captured(&["--config", &data("diamond.json"), "validate", "--json"]);
    assert_eq!(code, EXIT_VALIDATION);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["poset"]["errors"][0]["error"], "DownsetNotChain");
    let diag: Value = serde_json::from_str(err.lines().next().unwrap()).unwrap();
    assert_eq!(diag["kind"], "poset");
}

#[test]
fn projective_plane_fan() {
    let (code, out, _) = run_captured(&["--config", &data("cp2.json"), "fan", "--json"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["rays"].as_array().unwrap().len(), 3);
    assert_eq!(v["cones"].as_array().unwrap().len(), 3);
    assert_eq!(v["smooth"], true);
    assert_eq!(v["complete"], true);
}

#[test]
fn invariants_and_block() {
    let (code, out, _) = run_captured(&["--config", &data("hirzebruch2.json"), "invariants", "--json"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["chern_pairing_identity"], true);
    assert_eq!(v["cells"]["euler"], 4);

    let dir = scratch("block");
    let (code, out, _) =
        run_captured(&["--config", &data("cp2.json"), "block", "--alpha", "a", "--samples", "16", "--out", dir.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["seed_ok"], true);
    let csv = std::fs::read_to_string(dir.join("profile_a.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 16);
    let (code, _, _) = run_captured(&["--config", &data("cp2.json"), "block", "--alpha", "zz"]);
    assert_eq!(code, EXIT_VALIDATION);
}

#[test]
fn simulate_writes_monotone_csv() {
    let dir = scratch("simulate");
    let args = ["--config", &data("cp2.json"), "--tol", "1e-4", "--out", dir.to_str().unwrap(), "simulate", "--mode", "real", "--t-final", "2"];
    let (code, out, _) = run_captured(&args);
    assert_eq!(code, EXIT_OK, "{out}");
    let csv = std::fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x1,x2,p1,p2,E,F1,F2");
    let t: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(t.len() > 2);
    assert!(t.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(*t.last().unwrap(), 2.0);
    let drift: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("drift.json")).unwrap()).unwrap();
    assert_eq!(drift["ok"], true);

    // Same config and seed give identical bytes.
    let again = scratch("simulate-again");
    let mut args2 = args;
    args2[5] = again.to_str().unwrap();
    run_captured(&args2);
    assert_eq!(csv, std::fs::read_to_string(again.join("trajectory.csv")).unwrap());
}

#[test]
fn multi_block_simulation_is_refused() {
    let (code, _, err) = run_captured(&["--config", &data("hirzebruch2.json"), "simulate"]);
    assert_eq!(code, EXIT_VALIDATION);
    assert!(err.contains("single block"));
}

#[test]
fn involution_and_reference_checks() {
    let (code, out, _) = run_captured(&["--config", &data("cp2.json"), "--samples", "50", "check-involution", "--json"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(v["report"]["max_ff"].as_f64().unwrap() < 1e-6);
    let (code, out, _) = run_captured(&["cpn", "--n", "3", "--check", "--samples", "20", "--json"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["ok"], true);
}

#[test]
fn io_and_schema_errors() {
    let (code, _, err) = run_captured(&["--config", &data("unknown_cover.json"), "validate"]);
    assert_eq!(code, EXIT_IO);
    assert!(err.contains("poset.covers[0]"));
    assert_eq!(run_captured(&["--config", "/nonexistent/klm.json", "fan"]).0, EXIT_IO);
    assert_eq!(run_captured(&["fan"]).0, EXIT_IO);
    assert_eq!(run_captured(&["no-such-command"]).0, EXIT_IO);
    assert_eq!(run_captured(&["--help"]).0, EXIT_OK);
}
