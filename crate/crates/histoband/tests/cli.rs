use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn histoband(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_histoband"))
        .args(args)
        .env_remove("HISTOBAND_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn quantile_command() {
    let out = histoband(&["quantile", "--cells", "1", "--beta", "0.05"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1.959964");

    let out = histoband(&["quantile", "--cells", "1", "--beta", "0.3173105"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1.000000");

    assert_eq!(histoband(&["quantile", "--cells", "0", "--beta", "0.05"]).status.code(), Some(2));
    assert_eq!(histoband(&["quantile", "--cells", "3", "--beta", "1.5"]).status.code(), Some(2));
    assert_eq!(histoband(&["quantile", "--cells", "3"]).status.code(), Some(2));
}

#[test]
fn fit_command() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "a.csv", "x1,y\n0.1,1\n0.2,3\n0.7,5\n");
    let out = histoband(&["fit", &csv, "--inv-mesh", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["dim"], 1);
    let m: Vec<f64> = v["cells"].as_array().unwrap().iter().map(|c| c["m_hat"].as_f64().unwrap()).collect();
    assert_eq!(m, vec![2.0, 5.0]);
    assert_eq!(v["cells"][1]["sigma2_local"], 1e-8);
    assert!((v["cells"][0]["p_hat"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-15);

    let empty = write(dir.path(), "empty.csv", "");
    let out = histoband(&["fit", &empty, "--inv-mesh", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no data rows"));

    let header = write(dir.path(), "header.csv", "x1,x2,x3,y\n");
    let out = histoband(&["fit", &header, "--inv-mesh", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["dim"], 3);
    assert_eq!(v["n"], 0);
    assert_eq!(v["cells"].as_array().unwrap().len(), 8);

    let bad = write(dir.path(), "bad.csv", "x1,y\n0.1,1\n0.5,1\n0.3,oops\n");
    let out = histoband(&["fit", &bad, "--inv-mesh", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));

    let outside = write(dir.path(), "outside.csv", "x1,y\n0.1,1\n-0.2,1\n");
    let out = histoband(&["fit", &outside, "--inv-mesh", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"));
}

#[test]
fn fit_round_trips_written_values() {
    let dir = tempfile::tempdir().unwrap();
    let ys = [0.1 + 0.2, 1.0 / 3.0, -2.0e-7, 123_456.789_012_345_6];
    let mut text = String::from("x1,y\n");
    for (i, y) in ys.iter().enumerate() {
        text.push_str(&format!("{},{y}\n", (i as f64 + 0.5) / 4.0));
    }
    let csv = write(dir.path(), "rt.csv", &text);
    let out_path = dir.path().join("fit.json");
    let out = histoband(&["fit", &csv, "--inv-mesh", "4", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    for (c, y) in ys.iter().enumerate() {
        assert_eq!(v["cells"][c]["m_hat"].as_f64().unwrap(), *y);
    }
}

fn uniform_csv(dir: &Path) -> String {
    let mut text = String::from("x1,y\n");
    for i in 0..400 {
        let x = (i as f64 + 0.5) / 400.0;
        let y = (7.0 * x).sin() + 0.3 * ((i * 7919 % 101) as f64 / 101.0 - 0.5);
        text.push_str(&format!("{x},{y}\n"));
    }
    write(dir, "uniform.csv", &text)
}

fn radii(v: &Value) -> Vec<f64> {
    v["cells"].as_array().unwrap().iter().map(|c| c["radius"].as_f64().unwrap()).collect()
}

#[test]
fn band_command() {
    let dir = tempfile::tempdir().unwrap();
    let csv = uniform_csv(dir.path());

    let out = histoband(&["band", &csv, "--inv-mesh", "8", "--beta", "0.05", "--variance", "global"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stderr(&out).contains("J = 8"));
    let narrow = stdout_json(&out);
    let r05 = radii(&narrow);
    assert!(r05.iter().all(|r| (r - r05[0]).abs() < 1e-15), "equal p-hat gives equal radii");

    let out = histoband(&["band", &csv, "--inv-mesh", "8", "--beta", "0.5", "--variance", "global"]);
    let r50 = radii(&stdout_json(&out));
    assert!(r05.iter().zip(&r50).all(|(a, b)| a > b));

    let out = histoband(&["band", &csv, "--inv-mesh", "8", "--variance", "local"]);
    assert_eq!(out.status.code(), Some(0));

    let out = histoband(&["band", &csv, "--inv-mesh", "8", "--variance", "oracle"]);
    assert_eq!(out.status.code(), Some(2));

    let spec = write(
        dir.path(),
        "oracle.json",
        r#"{"schema":1,"covariates":{"kind":"uniform"},"noise":{"kind":"gaussian","sigma":0.1}}"#,
    );
    let csv_out = dir.path().join("band.csv");
    let out = histoband(&[
        "band", &csv, "--inv-mesh", "8", "--variance", "oracle", "--oracle-spec", &spec, "--csv-out",
        csv_out.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    // τ = (1/8)² / (0.01/8) = 12.5, radius = c / sqrt(12.5 · 400)
    let c = v["quantile"].as_f64().unwrap();
    assert!((radii(&v)[0] - c / 5000f64.sqrt()).abs() < 1e-12);
    let band_csv = std::fs::read_to_string(csv_out).unwrap();
    assert!(band_csv.starts_with("cell,box_lower_1,box_upper_1,center,lower,upper,degenerate"));
    assert_eq!(band_csv.lines().count(), 9);

    let bad_spec = write(dir.path(), "bad.json", r#"{"schema":3,"noise":{"kind":"gaussian","sigma":1}}"#);
    let out = histoband(&["band", &csv, "--inv-mesh", "8", "--variance", "oracle", "--oracle-spec", &bad_spec]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("schema"));
}

#[test]
fn band_marks_degenerate_cells() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "gap.csv", "x1,y\n0.1,1\n0.2,2\n0.15,1.5\n");
    let out = histoband(&["band", &csv, "--inv-mesh", "2", "--variance", "global"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    let cell = &v["cells"][1];
    assert_eq!(cell["degenerate"], true);
    assert!(cell["lower"].is_null() && cell["upper"].is_null());
    assert_eq!(v["cells"][0]["degenerate"], false);
}

fn coverage_config(dir: &Path, replications: usize, min_coverage: f64) -> String {
    let text = format!(
        r#"{{
  "schema": 1,
  "scenario": {{
    "dim": 1,
    "mesh": {{"fixed": 10}},
    "n": 2000,
    "regression": {{"kind": "piecewise_constant", "inv_mesh": 10}},
    "noise": {{"kind": "gaussian", "sigma": 1.0}},
    "beta": 0.1,
    "variance": "oracle",
    "replications": {replications},
    "seed": 4
  }},
  "thresholds": {{"min_coverage": {min_coverage}}}
}}"#
    );
    write(dir, &format!("cov{replications}_{min_coverage}.json"), &text)
}

#[test]
fn simulate_coverage_is_reproducible_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = coverage_config(dir.path(), 200, 0.8);
    let mut reports = Vec::new();
    for workers in ["1", "8"] {
        let path = dir.path().join(format!("report{workers}.json"));
        let out = histoband(&["simulate", "coverage", "--config", &cfg, "--workers", workers, "--out", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let mut v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(v["meta"]["workers"].as_u64().unwrap().to_string(), workers);
        v.as_object_mut().unwrap().remove("meta");
        reports.push(serde_json::to_string(&v).unwrap());
    }
    assert_eq!(reports[0], reports[1]);

    let out = Command::new(env!("CARGO_BIN_EXE_histoband"))
        .args(["simulate", "coverage", "--config", &cfg, "--workers", "1"])
        .env("HISTOBAND_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(stdout_json(&out)["meta"]["workers"], 3);

    let seeded = histoband(&["simulate", "coverage", "--config", &cfg, "--seed", "5"]);
    assert_eq!(stdout_json(&seeded)["seed"], 5);
}

#[test]
fn simulate_threshold_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = coverage_config(dir.path(), 50, 1.01);
    let out = histoband(&["simulate", "coverage", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("coverage"));
}

#[test]
fn simulate_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.json", r#"{"schema":1,"bogus":true}"#);
    assert_eq!(histoband(&["simulate", "coverage", "--config", &unknown]).status.code(), Some(2));
    let schema = write(dir.path(), "s.json", r#"{"schema":9}"#);
    let out = histoband(&["simulate", "coverage", "--config", &schema]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unsupported schema 9"));
    let no_scenario = write(dir.path(), "n.json", r#"{"schema":1}"#);
    assert_eq!(histoband(&["simulate", "rate", "--config", &no_scenario]).status.code(), Some(2));
    assert_eq!(histoband(&["simulate", "coverage"]).status.code(), Some(2));
}

#[test]
fn simulate_verify_binomial_default_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("r.csv");
    let out = histoband(&["simulate", "verify-binomial", "--records-csv", records.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["kind"], "verify-binomial");
    assert_eq!(v["summary"]["verify_binomial"]["verdict"], "bounded");
}

#[test]
fn simulate_phat_with_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "phat.json",
        r#"{"schema":1,
            "scenario":{"dim":1,"mesh":{"fixed":10},"n":1000,
                        "regression":{"kind":"holder_bump","alpha":1.0,"c_h":1.0},
                        "noise":{"kind":"gaussian","sigma":1.0},"replications":20,"seed":1},
            "sample_sizes":[1000,10000,100000],
            "thresholds":{"phat_decreasing":true}}"#,
    );
    let records = dir.path().join("records.csv");
    let out = histoband(&["simulate", "phat", "--config", &cfg, "--records-csv", records.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(records).unwrap();
    assert!(text.starts_with("point,n,replication,empty_cells,statistic,covered,degenerate"));
    assert_eq!(text.lines().count(), 61);
}
