use std::process::{Command, Output};

use serde_json::Value;

fn wfusion(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wfusion")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = wfusion(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid json")
}

fn csv_rows(args: &[&str]) -> Vec<Vec<String>> {
    let out = wfusion(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap().lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn code(args: &[&str]) -> i32 {
    wfusion(args).status.code().unwrap()
}

#[test]
fn fuse2_w2_w2_succeeds_half_the_time() {
    let v = json(&["fuse2", "--n", "2", "--m", "2"]);
    assert_eq!(v["command"], "fuse2");
    assert_eq!(v["results"]["success_probability"].as_f64().unwrap(), 0.5);
    assert_eq!(v["parameters"]["lambda_t"], "2pi/9");
    assert!(v["tool_version"].is_string());
    assert!(v.get("seed").is_none());
}

#[test]
fn fuse2_rejects_w1() {
    assert_eq!(code(&["fuse2", "--n", "2", "--m", "1"]), 2);
}

#[test]
fn fuse2_csv_has_five_rows_summing_to_one() {
    let rows = csv_rows(&["fuse2", "--n", "3", "--m", "4", "--format", "csv"]);
    assert_eq!(rows.len(), 5);
    let total: f64 = rows.iter().map(|r| r[4].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn fuse3_w2_triplet() {
    let v = json(&["fuse3", "--n", "2", "--m", "2", "--t", "2"]);
    assert_eq!(v["results"]["success_probability"].as_f64().unwrap(), 0.375);
    let ggg = v["results"]["branches"].as_array().unwrap().iter().find(|b| b["outcome"] == "ggg").unwrap();
    assert_eq!(ggg["probability"].as_f64().unwrap(), 0.125);
    assert_eq!(csv_rows(&["fuse3", "--n", "2", "--m", "3", "--t", "4", "--format", "csv"]).len(), 8);
}

#[test]
fn fuse3_needs_t() {
    assert_eq!(code(&["fuse3", "--n", "2", "--m", "2"]), 2);
}

#[test]
fn csv_and_json_agree() {
    let v = json(&["fuse2", "--n", "3", "--m", "5", "--lambda-t", "0.4"]);
    let rows = csv_rows(&["fuse2", "--n", "3", "--m", "5", "--lambda-t", "0.4", "--format", "csv"]);
    for (row, branch) in rows.iter().zip(v["results"]["branches"].as_array().unwrap()) {
        assert_eq!(row[3], branch["outcome"].as_str().unwrap());
        assert_eq!(row[4].parse::<f64>().unwrap(), branch["probability"].as_f64().unwrap());
    }
}

#[test]
fn lambda_t_token_and_decimal() {
    let exact = json(&["fuse2", "--n", "2", "--m", "3", "--lambda-t", "2pi/9"]);
    let decimal = json(&["fuse2", "--n", "2", "--m", "3", "--lambda-t", "0.6981317007977318"]);
    assert_eq!(exact["results"], decimal["results"]);
    assert_eq!(code(&["fuse2", "--n", "2", "--m", "3", "--lambda-t", "two"]), 2);
}

#[test]
fn validate_leakage_decreases() {
    let rows = csv_rows(&["validate", "--delta-over-g", "5,10,20"]);
    assert_eq!(rows.len(), 3);
    let leak: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(leak[0] > leak[1] && leak[1] > leak[2], "{leak:?}");
}

#[test]
fn validate_preconditions() {
    assert_eq!(code(&["validate", "--delta-over-g", "0.5"]), 2);
    assert_eq!(code(&["validate", "--delta-over-g", "10", "--g-khz", "0"]), 2);
}

#[test]
fn validate_norm_drift_is_numerical() {
    assert_eq!(code(&["validate", "--delta-over-g", "10", "--dt-divisor", "2"]), 3);
}

#[test]
fn pipeline_w3_mean_near_four() {
    let v = json(&["pipeline", "--target", "3", "--primitive", "two", "--trials", "100000", "--seed", "7"]);
    let r = &v["results"];
    let mean = r["expected_bell_pairs"].as_f64().unwrap();
    let se = r["bell_pairs_stderr"].as_f64().unwrap();
    assert!((mean - 4.0).abs() < 3.0 * se, "{mean} ± {se}");
    assert_eq!(v["seed"], 7);
    assert_eq!(r["outcome_histogram"]["Produced"], 100000);
}

#[test]
fn pipeline_is_byte_deterministic() {
    let args = ["pipeline", "--target", "5", "--recycle", "--trials", "5000", "--seed", "3"];
    assert_eq!(wfusion(&args).stdout, wfusion(&args).stdout);
}

#[test]
fn pipeline_exact() {
    let v = json(&["pipeline", "--target", "2", "--exact"]);
    assert_eq!(v["results"]["expected_cost"]["bell_pairs"].as_f64().unwrap(), 1.0);
    let v = json(&["pipeline", "--target", "3", "--exact"]);
    assert_eq!(v["results"]["expected_cost"]["bell_pairs"].as_f64().unwrap(), 4.0);
    assert_eq!(code(&["pipeline", "--target", "1", "--exact"]), 2);
    assert_eq!(code(&["pipeline", "--target", "4", "--exact", "--max-rounds", "1"]), 2);
}

#[test]
fn sweep_columns() {
    let out = wfusion(&["sweep", "--targets", "3,4", "--trials", "1000", "--seed", "9"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("target,strategy,expected_cost,mc_mean,mc_stderr,trials,seed"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn feasibility_defaults() {
    let v = json(&["feasibility"]);
    let r = &v["results"];
    assert!((r["interaction_time"].as_f64().unwrap() / 4.63e-5 - 1.0).abs() < 0.01);
    assert!((r["time_margin_atomic"].as_f64().unwrap() - 650.0).abs() < 10.0);
    assert!((r["time_margin_cavity"].as_f64().unwrap() - 650.0).abs() < 10.0);
    assert_eq!(code(&["feasibility", "--g-khz", "0"]), 2);
}

#[test]
fn out_flag_writes_file() {
    let path = std::env::temp_dir().join(format!("wfusion-cli-test-{}.json", std::process::id()));
    let out = wfusion(&["feasibility", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(v["command"], "feasibility");
    assert_eq!(v["parameters"]["out"], path.to_str().unwrap());
}
