use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn smoother(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smoother")).args(args).env_remove("SMOOTHER_THREADS").output().expect("binary runs")
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

// Column maximum of errors.csv, parsed back from its text.
fn column_max(path: &Path, column: &str) -> f64 {
    let mut r = csv::Reader::from_path(path).unwrap();
    let k = r.headers().unwrap().iter().position(|h| h == column).unwrap();
    r.records().map(|rec| rec.unwrap()[k].parse::<f64>().unwrap()).fold(f64::NEG_INFINITY, f64::max)
}

fn run_in(dir: &Path, scenario: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", scenario.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    smoother(&args)
}

const X_ABS_X_C1: &str = r#"{
    "name": "x_abs_x_line", "dimension": 1, "pipeline": "approx-c1",
    "target": {"dim": 1, "expr": "x*abs(x)", "class": "C1"},
    "epsilon": {"dim": 1, "expr": "0.2"},
    "box": {"lo": [-2], "hi": [2]}, "grid_spacing": 0.001
}"#;

#[test]
fn corpus_scenario_writes_all_outputs_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &scenario("abs_lip.json"), &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["certificates.json", "result.json", "errors.csv", "plotdata.csv"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let certs = read_json(&dir.path().join("certificates.json"));
    assert!(certs.as_array().unwrap().iter().all(|c| c["verdict"] == "pass"));
    let result = read_json(&dir.path().join("result.json"));
    assert_eq!(result["status"], "pass");
    for key in ["j_used", "L_out", "a_measured"] {
        assert!(result["metrics"].get(key).is_some(), "{key} missing from result.json");
    }
    let mut r = csv::Reader::from_path(dir.path().join("errors.csv")).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), ["x1", "f", "g", "|f-g|", "|df-dg|"]);
    // 4001 lattice points on [−2, 2] at spacing 1e−3
    assert_eq!(r.records().count(), 4001);
}

// The error certificate measures |g − f| − ε with ε ≡ 0.1; subtracting a
// constant commutes with the maximum under rounding, so the match is exact.
#[test]
fn error_table_reproduces_the_measured_maximum() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_in(dir.path(), &scenario("abs_lip.json"), &[])), 0);
    let certs = read_json(&dir.path().join("certificates.json"));
    let err = certs.as_array().unwrap().iter().find(|c| c["claim"]["lhs"] == "|g − f|").unwrap();
    let top = column_max(&dir.path().join("errors.csv"), "|f-g|");
    assert_eq!(top - 0.1, err["measured_max"].as_f64().unwrap());
}

#[test]
fn c1_error_table_matches_both_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.json", X_ABS_X_C1);
    let out = dir.path().join("out");
    let o = run_in(&out, &s, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let certs = read_json(&out.join("certificates.json"));
    let certs = certs.as_array().unwrap();
    for (lhs, column) in [("|g − f|", "|f-g|"), ("|dg − df|", "|df-dg|")] {
        let c = certs.iter().find(|c| c["claim"]["lhs"] == lhs && c["provenance"].as_str().unwrap().contains("aε")).unwrap();
        // right-hand side reads "a·ε"
        let a: f64 = c["claim"]["rhs"].as_str().unwrap().split('·').next().unwrap().parse().unwrap();
        assert_eq!(column_max(&out.join("errors.csv"), column) - a * 0.2, c["measured_max"].as_f64().unwrap(), "{lhs}");
    }
    let a = read_json(&out.join("result.json"))["metrics"]["a_measured"].as_f64().unwrap();
    assert!(a <= 8.0);
}

#[test]
fn malformed_json_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "bad.json", "{\n  \"name\": \"x\",\n  \"dimension\": 1,,\n}");
    let o = run_in(&dir.path().join("out"), &s, &[]);
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    assert!(e.contains("line 3") && e.contains("column"), "{e}");
}

#[test]
fn zero_tolerance_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "zero.json", &X_ABS_X_C1.replace("\"0.2\"", "\"0\""));
    let o = run_in(&dir.path().join("out"), &s, &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("degenerate"), "{}", stderr(&o));
}

#[test]
fn unreachable_tolerance_is_no_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "tight.json", &std::fs::read_to_string(scenario("abs_lip.json")).unwrap().replace("\"0.1\"", "\"1e-9\""));
    let out = dir.path().join("out");
    let o = run_in(&out, &s, &["--jmax", "3"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let r = read_json(&out.join("result.json"));
    assert_eq!(r["status"], "no_convergence");
    assert_eq!(r["j_max"], 3);
}

#[test]
fn spacing_flag_overrides_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_in(dir.path(), &scenario("abs_lip.json"), &["--spacing", "0.01"])), 0);
    assert_eq!(read_json(&dir.path().join("result.json"))["grid_spacing"], 0.01);
    assert_eq!(csv::Reader::from_path(dir.path().join("errors.csv")).unwrap().records().count(), 401);
}

#[test]
fn other_pipelines_run() {
    for name in ["gadget_check.json", "bump_axis_square.json", "embed_circle.json", "embed_square.json"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run_in(dir.path(), &scenario(name), &[]);
        assert_eq!(code(&o), 0, "{name}: {}", stderr(&o));
        assert!(dir.path().join("plotdata.csv").is_file());
    }
}

#[test]
fn every_shipped_scenario_validates() {
    let mut n = 0;
    for entry in std::fs::read_dir(scenario("")).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "json") {
            let o = smoother(&["validate", p.to_str().unwrap()]);
            assert_eq!(code(&o), 0, "{}: {}", p.display(), stderr(&o));
            n += 1;
        }
    }
    assert!(n >= 13);
}

#[test]
fn validate_rejects_a_missing_file() {
    assert_eq!(code(&smoother(&["validate", "/nonexistent/scenario.json"])), 2);
}

#[test]
fn thread_cap_must_be_a_number() {
    let o = Command::new(env!("CARGO_BIN_EXE_smoother"))
        .args(["validate", scenario("abs_lip.json").to_str().unwrap()])
        .env("SMOOTHER_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_smoother"))
        .args(["validate", scenario("abs_lip.json").to_str().unwrap()])
        .env("SMOOTHER_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
}

#[test]
fn calibration_is_deterministic_and_replaces_a_corrupt_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "calibration.json", "{\"sharpness\": 1.0, \"psi_ra");
    let p = path.to_str().unwrap();
    let first = smoother(&["calibrate", "--out", p, "--spacing", "0.01"]);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let a = std::fs::read(&path).unwrap();
    assert_eq!(code(&smoother(&["calibrate", "--out", p, "--spacing", "0.01"])), 0);
    assert_eq!(a, std::fs::read(&path).unwrap());
    let cal = read_json(&path);
    assert!(cal["l_psi"].as_f64().unwrap() >= 4.0);
    assert!(String::from_utf8_lossy(&first.stdout).contains("A_psi"));
    // no temporary file left behind
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn shipped_calibration_is_reproduced() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("calibration.json");
    assert_eq!(code(&smoother(&["calibrate", "--out", path.to_str().unwrap()])), 0);
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../smoother/calibration.json");
    assert_eq!(read_json(&path), read_json(&shipped));
}
