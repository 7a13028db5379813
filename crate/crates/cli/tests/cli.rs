use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn parmono(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parmono")).args(args).env_remove("PARMONO_JOBS").output().expect("spawn parmono")
}

fn run_json(args: &[&str]) -> (i32, Value) {
    let out = parmono(args);
    let code = out.status.code().unwrap();
    let v =
        serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)));
    (code, v)
}

fn stderr_code(out: &Output) -> String {
    let v: Value = serde_json::from_slice(&out.stderr).expect("error envelope");
    v["error"].as_str().unwrap().to_string()
}

fn complex(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

fn p(name: &str) -> String {
    fixture(name).display().to_string()
}

#[test]
fn monodromy_scalar_power_on_unit_circle() {
    let (code, v) =
        run_json(&["monodromy", "--system", &p("scalar_power.json"), "--grid", &p("grid_unit.json"), "--base", "0.5"]);
    assert_eq!(code, 0);
    let recs = v["records"].as_array().unwrap();
    assert_eq!(recs.len(), 5);
    for r in recs {
        let t = complex(&r["t"][0]).0;
        let (re, im) = complex(&r["M"][0][0]);
        let want = (2.0 * std::f64::consts::PI * t).sin_cos();
        assert!((re - want.1).abs() < 1e-8 && (im - want.0).abs() < 1e-8, "t = {t}");
    }
    assert_eq!(v["manifest"]["command"], "monodromy");
}

#[test]
fn missing_file_is_reported() {
    let out = parmono(&["monodromy", "--system", "/no/such/file.json", "--t", "0", "--base", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_code(&out), "FILE_NOT_FOUND");
}

#[test]
fn migrating_cell_is_flagged() {
    let (code, v) = run_json(&[
        "monodromy",
        "--system",
        &p("migrating.json"),
        "--grid",
        &p("grid_migrating.json"),
        "--base",
        "-1",
        "--pole",
        "0",
    ]);
    assert_eq!(code, 2);
    let recs = v["records"].as_array().unwrap();
    assert!(recs[0]["M"].is_array() && recs[1]["M"].is_array());
    assert_eq!(recs[2]["error"]["error"], "POLE_MIGRATION");
    assert_eq!(v["failed_cells"], 1);
}

fn classify(system: &str) -> Value {
    let (code, v) = run_json(&["classify", "--system", &p(system), "--grid", &p("grid_short.json"), "--base", "-1-1i"]);
    assert_eq!(code, 0);
    v
}

#[test]
fn classify_verdicts() {
    assert_eq!(classify("dh_lax.json")["verdict"], "projectively_isomonodromic");
    assert_eq!(classify("constant_residue.json")["verdict"], "isomonodromic");
    assert_eq!(classify("diagonal.json")["verdict"], "neither");
}

#[test]
fn integrable_command() {
    let (code, v) = run_json(&["integrable", "--system", &p("integrable.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["integrable"], true);
    assert!(v["pairs"][0]["residual"].as_f64().unwrap() < 1e-9);

    let (_, v) = run_json(&["integrable", "--system", &p("nonabelian.json")]);
    assert_eq!(v["integrable"], false);
    assert!((v["pairs"][0]["residual"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let out = parmono(&["integrable", "--system", &p("missing_direction.json")]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_code(&out), "MISSING_DIRECTION");
}

#[test]
fn halphen_standard_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = parmono(&["halphen", "--config", &p("halphen_standard.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["report"]["max_residual"].as_f64().unwrap() < 1e-6);
    let mut rd = csv::Reader::from_path(dir.path().join("report.csv")).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert!(header.contains(&"beta2_re".to_string()) && header.contains(&"c3_im".to_string()));
    assert_eq!(rd.records().count(), 5);
}

#[test]
fn halphen_symmetric_dhv_matches_riccati() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("traj.csv");
    let o = parmono(&["halphen", "--config", &p("halphen_dhv_symmetric.json"), "--csv", csv_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let mut rd = csv::Reader::from_path(&csv_path).unwrap();
    let w0 = 0.5;
    for rec in rd.records() {
        let rec = rec.unwrap();
        let t: f64 = rec[0].parse().unwrap();
        for col in [2, 4, 6] {
            let w: f64 = rec[col].parse().unwrap();
            assert!((w - w0 / (1.0 + w0 * t)).abs() < 1e-9, "t = {t}");
        }
        let (theta, phi): (f64, f64) = (rec[8].parse().unwrap(), rec[10].parse().unwrap());
        assert!((theta - phi).abs() < 1e-9);
    }
}

#[test]
fn halphen_collision_fails() {
    let out = parmono(&["halphen", "--config", &p("halphen_collision.json")]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_code(&out), "COLLISION");
}

#[test]
fn frobenius_command() {
    let (code, v) = run_json(&["frobenius", "--system", &p("residue_only.json"), "--pole", "0", "--order", "5"]);
    assert_eq!(code, 0);
    for h in v["solution"]["series"].as_array().unwrap() {
        for row in h.as_array().unwrap() {
            for z in row.as_array().unwrap() {
                let (re, im) = complex(z);
                assert!(re.abs() < 1e-14 && im.abs() < 1e-14);
            }
        }
    }

    let out = parmono(&["frobenius", "--system", &p("log_example.json"), "--pole", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_code(&out), "RESONANT_SPECTRUM");

    let (_, v) = run_json(&["frobenius", "--system", &p("scalar_power.json"), "--pole", "0", "--t", "0.3"]);
    let (re, im) = complex(&v["solution"]["exponent"][0][0]);
    assert!((re - 0.3).abs() < 1e-15 && im.abs() < 1e-15);
}

fn without_wall_clock(text: &str) -> String {
    text.lines().filter(|l| !l.trim_start().starts_with("\"wall_clock\"")).collect::<Vec<_>>().join("\n")
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<String> = ["1", "4"]
        .iter()
        .map(|jobs| {
            let out = dir.path().join("m.json");
            let o = parmono(&[
                "--jobs",
                jobs,
                "classify",
                "--system",
                &p("dh_lax.json"),
                "--grid",
                &p("grid_short.json"),
                "--base",
                "-1-1i",
                "--out",
                out.to_str().unwrap(),
            ]);
            assert_eq!(o.status.code(), Some(0));
            std::fs::read_to_string(&out).unwrap()
        })
        .collect();
    assert_eq!(without_wall_clock(&runs[0]), without_wall_clock(&runs[1]));
}

#[test]
fn jobs_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_parmono"))
        .args(["frobenius", "--system", &p("scalar_power.json"), "--pole", "0", "--t", "0.25"])
        .env("PARMONO_JOBS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}
