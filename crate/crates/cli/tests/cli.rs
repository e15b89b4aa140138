use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ergolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergolab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.json");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn list_has_one_line_per_tag() {
    let o = ergolab(&["list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let tags: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(
        tags,
        ["poincare-chain", "lsi-chain", "fsobolev-chain", "hitting-xcheck", "ladder", "integrability", "decay-suite"]
    );
}

#[test]
fn list_json_is_machine_readable() {
    let o = ergolab(&["list", "--json"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let a = v.as_array().unwrap();
    assert_eq!(a.len(), 7);
    assert!(a.iter().all(|e| e["tag"].is_string() && e["description"].is_string()));
}

#[test]
fn unknown_key_exits_2_and_names_it() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), r#"{"experiment": "poincare-chain", "foo": 1}"#);
    let o = ergolab(&["run", &cfg, "--out", d.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("foo"));
}

#[test]
fn unknown_param_exits_2_and_names_it() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), r#"{"experiment": "ladder", "params": {"k_maxx": 3}}"#);
    let o = ergolab(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("k_maxx"));
}

#[test]
fn unknown_experiment_and_missing_file_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), r#"{"experiment": "bogus"}"#);
    assert_eq!(ergolab(&["run", &cfg]).status.code(), Some(2));
    assert_eq!(ergolab(&["run", d.path().join("nope.json").to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn nonintegrable_scenario_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        r#"{"experiment": "poincare-chain", "scenarios": [{"family": "cauchy", "params": {"c": 0.4}}]}"#,
    );
    assert_eq!(ergolab(&["run", &cfg]).status.code(), Some(2));
}

#[test]
fn failed_check_exits_1() {
    // The quadratic ladder diverges, so a convergent expectation fails.
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        r#"{"experiment": "ladder", "grid_n": 256,
            "scenarios": [{"family": "quadratic"}],
            "params": {"w": {"a": 0.25, "p": 2.0}, "probe_tv": false, "probe_kernel": false,
                       "per_scenario": [{"expect": {"verdict": "convergent"}}]}}"#,
    );
    let o = ergolab(&["run", &cfg, "--out", d.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let s: Value = serde_json::from_str(&fs::read_to_string(d.path().join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(s["verdict"], "inconsistent");
}

#[test]
fn poincare_chain_on_ou() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("o");
    let cfg = write_config(d.path(), r#"{"experiment": "poincare-chain", "params": {"cruc_functions": 20}}"#);
    let o = ergolab(&["run", &cfg, "--out", out.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["seed"], 5);
    assert_eq!(s["verdict"], "consistent");
    let r = &s["results"][0];
    assert!((r["spectral_gap"].as_f64().unwrap() - 1.0).abs() < 5e-3);
    assert!((r["c"].as_f64().unwrap() - 0.085336).abs() < 1e-4);
    assert!(r["theta_star"].as_f64().unwrap() > 0.0);
    assert!(!s["exercises"].as_array().unwrap().is_empty());

    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("scenario,quantity,value\n"));
    assert!(!csv.contains('\r'));
    let plot = fs::read_to_string(out.join("plotdata/quadratic_v.csv")).unwrap();
    assert!(plot.starts_with("x,v\n"));
    assert!(plot.lines().skip(1).all(|l| l.split(',').count() == 2));
}

#[test]
fn ladder_emits_partial_sums() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("o");
    let cfg = write_config(
        d.path(),
        r#"{"experiment": "ladder", "grid_n": 256,
            "scenarios": [{"family": "logpower", "params": {"beta": 2.0}}],
            "params": {"probe_tv": false, "probe_kernel": false,
                       "per_scenario": [{"expect": {"verdict": "convergent"}}]}}"#,
    );
    let o = ergolab(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let sk = fs::read_to_string(out.join("plotdata/logpower_beta_2_ladder_partial_sums.csv")).unwrap();
    assert!(sk.starts_with("k,S_K\n"));
    assert_eq!(sk.lines().count(), 81);
}

#[test]
fn hitting_csv_header() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("o");
    let cfg = write_config(
        d.path(),
        r#"{"experiment": "hitting-xcheck", "grid_n": 512, "params": {"n_paths": 2000, "dt": 0.01}}"#,
    );
    ergolab(&["run", &cfg, "--out", out.to_str().unwrap()]);
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,theta,h_tag,estimate,stderr,n_paths,dt,truncation_hits,seed"));
    assert_eq!(lines.next().unwrap().split(',').count(), 9);
}
