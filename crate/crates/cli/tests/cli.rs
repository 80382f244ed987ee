use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn flowknot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowknot"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn degree_of_moore_spiegel_origin() {
    let o = flowknot(&[
        "degree", "--system", "moore-spiegel", "--T", "27", "--R", "100", "--center", "0,0,0",
        "--radius", "0.01",
    ]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    let r = &v["result"];
    assert_eq!(r["degree"], -1);
    assert!((r["raw_degree"].as_f64().unwrap() + 1.0).abs() < 0.1);
    for key in ["center", "radius", "subdivision"] {
        assert!(!r[key].is_null(), "{key}");
    }
    assert_eq!(v["config"]["options"]["radius"].as_f64(), Some(0.01));
}

#[test]
fn simulate_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = flowknot(&[
        "simulate", "--system", "nose-hoover", "--Q", "1", "--init", "1,0,0", "--t", "200",
        "--format", "csv", "--out", out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("simulate.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x,y,z"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[1], "1.0000000000000000e0");
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[0] - 200.0).abs() < 1e-9);
    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("simulate.json")).unwrap()).unwrap();
    assert_eq!(meta["result"]["escaped"], false);
    assert_eq!(meta["config"]["options"]["t_end"].as_f64(), Some(200.0));
    let leftovers: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with('.'))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn floats_carry_seventeen_digits() {
    let o = flowknot(&["field-eval", "--system", "moore-spiegel", "--point", "0.1,0.2,0.3"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let field_line = text.lines().find(|l| l.contains("\"field\"")).unwrap();
    let first = field_line.split('[').nth(1).unwrap().split(',').next().unwrap().trim();
    assert_eq!(first, "2.0000000000000001e-1");
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["simulate", "--bogus"],
        vec!["simulate", "--init", "1,2"],
        vec!["simulate", "--system", "both"],
        vec!["degree", "--system", "moore-spiegel", "--format", "csv"],
        vec!["index", "--system", "nose-hoover", "--Q", "-1"],
        vec!["simulate", "--config", "/nonexistent/config.json"],
        vec!["parse-field"],
        vec!["no-such-command"],
    ] {
        let o = flowknot(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn numerical_failure_reports_structured_error() {
    let o = flowknot(&["index", "--system", "nose-hoover", "--point", "1,0,0"]);
    assert_eq!(code(&o), 1);
    let v = stdout_json(&o);
    assert!(v["error"]["kind"].is_string());
    assert!(v["error"]["message"].as_str().unwrap().len() > 5);
    assert_eq!(v["command"], "index");
}

#[test]
fn config_file_with_flag_override_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"system": "moore-spiegel", "t": 39.25, "options": {"radius": 0.02, "subdivision": 4}}"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let o = flowknot(&["degree", "--config", c, "--T", "27"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["config"]["t"].as_f64(), Some(27.0));
    assert_eq!(v["config"]["options"]["radius"].as_f64(), Some(0.02));
    assert_eq!(v["result"]["subdivision"], 4);

    let replay = dir.path().join("replay.json");
    fs::write(&replay, serde_json::to_string(&v["config"]).unwrap()).unwrap();
    let again = flowknot(&["degree", "--config", replay.to_str().unwrap()]);
    assert_eq!(again.stdout, o.stdout);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = ["avoidance", "--system", "nose-hoover", "--samples", "2000", "--seed", "5"];
    let a = flowknot(&args);
    let b = flowknot(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let c = flowknot(&["avoidance", "--system", "nose-hoover", "--samples", "2000", "--seed", "6"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn hopf_orbit_classification() {
    let o = flowknot(&["classify-orbit", "--system", "hopf", "--guess", "1.2,0"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    let orbit = &v["result"]["orbits"][0];
    assert!((orbit["period"].as_f64().unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-8);
    let braid = &orbit["braid"];
    assert_eq!(braid["n_strands"], 1);
    assert_eq!(braid["verdict"], "CertifiedUnknot");
    assert_eq!(braid["alexander"]["coeffs"], serde_json::json!([1]));
}

#[test]
fn sweep_exit_csv_on_both_arcs() {
    for (arc, surface) in [("l1", "H1"), ("l2", "H2")] {
        let o = flowknot(&["sweep-exit", "--system", "moore-spiegel", "--arc", arc, "--format", "csv"]);
        assert_eq!(code(&o), 0);
        let text = String::from_utf8(o.stdout).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().any(|r| r.split(',').nth(2) == Some(surface)), "{text}");
    }
}

fn write_field(dir: &Path, text: &str) -> String {
    let p = dir.join("field.txt");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn custom_field_matches_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_field(
        dir.path(),
        "# Moore-Spiegel\nT = 27\nR = 100\nxdot = y\nydot = z\nzdot = -z - (T - R + R*x^2)*y - T*x\n",
    );
    let parsed = flowknot(&["parse-field", "--field-file", &f]);
    assert_eq!(code(&parsed), 0);
    assert_eq!(stdout_json(&parsed)["result"]["params"]["T"].as_f64(), Some(27.0));

    let custom = flowknot(&["field-eval", "--system", "custom", "--field-file", &f, "--point", "0.5,-1,2"]);
    let builtin = flowknot(&["field-eval", "--system", "moore-spiegel", "--point", "0.5,-1,2"]);
    assert_eq!(stdout_json(&custom)["result"]["field"], stdout_json(&builtin)["result"]["field"]);

    let overridden = flowknot(&[
        "field-eval", "--system", "custom", "--field-file", &f, "--param", "T=39.25", "--point", "0.5,-1,2",
    ]);
    let builtin = flowknot(&["field-eval", "--system", "moore-spiegel", "--T", "39.25", "--point", "0.5,-1,2"]);
    assert_eq!(stdout_json(&overridden)["result"]["field"], stdout_json(&builtin)["result"]["field"]);
}

#[test]
fn invalid_field_file_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_field(dir.path(), "xdot = y\nydot = z +\nzdot = x\n");
    let o = flowknot(&["parse-field", "--field-file", &f]);
    assert_eq!(code(&o), 1);
    let v = stdout_json(&o);
    assert_eq!(v["error"]["kind"], "parse");
    assert!(v["error"]["message"].as_str().unwrap().starts_with("2:"));
}

#[test]
fn verify_claims_nose_hoover() {
    let o = flowknot(&["verify-claims", "--system", "nose-hoover", "--samples", "20000"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    let entries = v["result"]["entries"].as_array().unwrap();
    assert!(entries.iter().all(|e| e["status"] != "Fail"));
    assert!(entries.iter().any(|e| e["claim_id"] == "census.nose-hoover"));
    assert!(entries.iter().all(|e| !e["anchor"].as_str().unwrap().is_empty()));
}

#[test]
fn verify_claims_mutation_fails_index_claims() {
    let o = flowknot(&["verify-claims", "--system", "moore-spiegel", "--mutate-index-sign"]);
    assert_eq!(code(&o), 1);
    let v = stdout_json(&o);
    let failed: Vec<&str> = v["result"]["entries"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["status"] == "Fail")
        .map(|e| e["claim_id"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["index.analytic", "poincare-hopf.moore-spiegel"]);
}
