//! End-to-end runs of the `microrev` binary: exit codes, file formats and
//! the numbers that land in them.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_microrev");

fn schemas_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

fn microrev(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("MICROREV_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn assert_valid(schema_file: &str, instance: &Value) {
    let schema: Value = serde_json::from_str(&fs::read_to_string(schemas_dir().join(schema_file)).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator
        .iter_errors(instance)
        .map(|e| format!("{e} at {}", e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{schema_file}: {errors:?}");
}

type Row = HashMap<String, String>;

fn read_csv(path: &Path) -> (Vec<String>, Vec<Row>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| {
            header
                .iter()
                .cloned()
                .zip(rec.unwrap().iter().map(String::from))
                .collect()
        })
        .collect();
    (header, rows)
}

fn num(row: &Row, key: &str) -> f64 {
    row[key].parse().unwrap_or_else(|_| panic!("{key} = {:?}", row[key]))
}

fn expected_header(name: &str) -> Vec<String> {
    let v: Value = serde_json::from_str(&fs::read_to_string(schemas_dir().join("csv_headers.json")).unwrap()).unwrap();
    v[name]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s.as_str().unwrap().to_string())
        .collect()
}

#[test]
fn ratio_null_transition() {
    let dir = tempfile::tempdir().unwrap();
    let out = microrev(
        dir.path(),
        &[
            "ratio",
            "--alpha-i",
            "0",
            "--alpha-f",
            "0",
            "--nth",
            "1",
            "--tau",
            "0.7",
        ],
    );
    assert_eq!(code(&out), 0);
    let rec = stdout_json(&out);
    assert_valid("result_record.schema.json", &rec);
    assert_eq!(rec["engine"], "analytic");
    assert!(rec["log_ratio"].as_f64().unwrap().abs() < 1e-15);
    assert!((rec["upsilon"].as_f64().unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn ratio_reproduces_measured_modification_factor() {
    let dir = tempfile::tempdir().unwrap();
    let out = microrev(
        dir.path(),
        &[
            "ratio",
            "--alpha-i",
            "3.14",
            "--alpha-f",
            "2.17",
            "--nth",
            "3.57",
            "--tau",
            "0.7",
        ],
    );
    assert_eq!(code(&out), 0);
    let log_ups = stdout_json(&out)["log_upsilon"].as_f64().unwrap();
    let target = 1.57f64.ln();
    assert!(((log_ups - target) / target).abs() < 0.05, "{log_ups}");
}

#[test]
fn fock_engine_matches_analytic() {
    let dir = tempfile::tempdir().unwrap();
    let q = ["--alpha-i", "1", "--alpha-f", "0.5", "--nth", "1", "--tau", "0.7"];
    let analytic = stdout_json(&microrev(dir.path(), &[&["ratio"][..], &q].concat()));
    let out = microrev(
        dir.path(),
        &[&["ratio", "--engine", "fock", "--dim", "40"][..], &q].concat(),
    );
    assert_eq!(code(&out), 0);
    let fock = stdout_json(&out);
    assert_valid("result_record.schema.json", &fock);
    assert_eq!(fock["dim"], 40);
    for key in ["p_fwd", "p_bwd"] {
        let (a, f) = (analytic[key].as_f64().unwrap(), fock[key].as_f64().unwrap());
        assert!(((f - a) / a).abs() < 1e-6, "{key}: {f} vs {a}");
    }
}

#[test]
fn montecarlo_engine_record() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "ratio",
        "--engine",
        "montecarlo",
        "--samples",
        "20000",
        "--seed",
        "3",
        "--alpha-i",
        "-1.3+0.7i",
        "--alpha-f",
        "1",
        "--beta",
        "0.5",
        "--tau",
        "0.5",
    ];
    let out = microrev(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rec = stdout_json(&out);
    assert_valid("result_record.schema.json", &rec);
    let (point, se) = (rec["log_ratio"].as_f64().unwrap(), rec["std_error"].as_f64().unwrap());
    assert!((point - rec["predicted_log_ratio"].as_f64().unwrap()).abs() < 4.0 * se);
    assert_eq!(stdout_json(&microrev(dir.path(), &args)), rec);
}

#[test]
fn ratio_usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 7] = [
        &[
            "ratio",
            "--alpha-i",
            "1",
            "--alpha-f",
            "1",
            "--nth",
            "-1",
            "--tau",
            "0.5",
        ],
        &[
            "ratio",
            "--alpha-i",
            "1",
            "--alpha-f",
            "1",
            "--nth",
            "1",
            "--tau",
            "1.5",
        ],
        &[
            "ratio",
            "--alpha-i",
            "one",
            "--alpha-f",
            "1",
            "--nth",
            "1",
            "--tau",
            "0.5",
        ],
        &["ratio", "--alpha-i", "1", "--alpha-f", "1", "--tau", "0.5"],
        &[
            "ratio",
            "--alpha-i",
            "1",
            "--alpha-f",
            "1",
            "--nth",
            "1",
            "--beta",
            "1",
            "--tau",
            "0.5",
        ],
        &[
            "ratio",
            "--alpha-i",
            "1",
            "--alpha-f",
            "1",
            "--nth",
            "0",
            "--tau",
            "0.5",
        ],
        &[
            "ratio",
            "--engine",
            "fock",
            "--dim",
            "1",
            "--alpha-i",
            "1",
            "--alpha-f",
            "1",
            "--nth",
            "1",
            "--tau",
            "0.5",
        ],
    ];
    for args in cases {
        let out = microrev(dir.path(), args);
        assert_eq!(code(&out), 2, "{args:?}");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(!stderr.trim().is_empty(), "{args:?}");
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn ratio_truncation_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = microrev(
        dir.path(),
        &[
            "ratio",
            "--engine",
            "fock",
            "--dim",
            "4",
            "--alpha-i",
            "2",
            "--alpha-f",
            "2",
            "--nth",
            "1",
            "--tau",
            "0.5",
        ],
    );
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncation too small"));
}

#[test]
fn default_fig3_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = microrev(dir.path(), &["sweep-fig3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_valid("sweep_summary.schema.json", &summary);
    let (header, rows) = read_csv(&dir.path().join("fig3.csv"));
    assert_eq!(header, expected_header("fig3"));
    assert_eq!(rows.len(), 40);
    assert_eq!(summary["rows"], 40);

    let analytic: Vec<&Row> = rows.iter().filter(|r| r["engine"] == "analytic").collect();
    let mc: Vec<&Row> = rows.iter().filter(|r| r["engine"] == "montecarlo").collect();
    assert_eq!((analytic.len(), mc.len()), (20, 20));
    for r in &analytic {
        assert!((num(r, "log_ratio") - num(r, "predicted_log_ratio")).abs() < 1e-10);
        let tau = num(r, "tau");
        let expected = if (num(r, "n_th") - 1.62).abs() < 1e-12 {
            0.15
        } else {
            0.30
        };
        assert_eq!(tau, expected);
    }
    let inside = mc
        .iter()
        .filter(|r| (num(r, "log_ratio") - num(r, "predicted_log_ratio")).abs() < 4.0 * num(r, "std_error"))
        .count();
    assert!(inside as f64 >= 0.95 * mc.len() as f64, "{inside}/{}", mc.len());
    for r in &mc {
        assert!(num(r, "ci_low") <= num(r, "log_ratio") && num(r, "log_ratio") <= num(r, "ci_high"));
    }

    let first = fs::read(dir.path().join("fig3.csv")).unwrap();
    assert_eq!(code(&microrev(dir.path(), &["sweep-fig3"])), 0);
    assert_eq!(first, fs::read(dir.path().join("fig3.csv")).unwrap());
}

#[test]
fn sweep_config_validation() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        fs::write(dir.path().join(name), text).unwrap();
    };
    write("empty.json", r#"{"nth_list": []}"#);
    write("unknown.json", r#"{"nth": [1.0]}"#);
    write(
        "mismatch.json",
        r#"{"amplitudes_i": [1, 2], "amplitudes_f": [1], "pairing": "zip"}"#,
    );
    write("badtau.json", r#"{"tau_list": [1.2]}"#);
    let cases: [&[&str]; 7] = [
        &["sweep-fig3", "--config", "empty.json"],
        &["sweep-fig3", "--nth-list"],
        &["sweep-upsilon", "--config", "empty.json"],
        &["sweep-fig3", "--config", "unknown.json"],
        &["sweep-fig3", "--config", "mismatch.json"],
        &["sweep-fig3", "--config", "badtau.json"],
        &["sweep-fig3", "--config", "missing.json"],
    ];
    for args in cases {
        let out = microrev(dir.path(), args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(!dir.path().join("fig3.csv").exists());
}

#[test]
fn flags_override_config_and_output_dir_env() {
    let dir = tempfile::tempdir().unwrap();
    let config = serde_json::json!({
        "amplitudes_i": ["1+0.5i", 2.0],
        "amplitudes_f": [{"re": 0.5, "im": -0.2}, "1.5"],
        "nth_list": [1.0],
        "tau_list": [0.4, 0.9],
        "mc_samples": 0,
        "output_path": "nested/out.csv"
    });
    assert_valid("sweep_config.schema.json", &config);
    fs::write(dir.path().join("c.json"), config.to_string()).unwrap();

    let out = microrev(dir.path(), &["sweep-fig3", "--config", "c.json", "--nth-list", "0.5,2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&dir.path().join("nested/out.csv"));
    // 2 baths x 2 taus x 2 zipped pairs, analytic only
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r["engine"] == "analytic"));
    assert_eq!(num(&rows[0], "n_th"), 0.5);
    assert_eq!(num(&rows[0], "alpha_i_im"), 0.5);
    assert_eq!(num(&rows[0], "alpha_f_im"), -0.2);

    let elsewhere = dir.path().join("redirected");
    let out = Command::new(BIN)
        .args(["sweep-fig3", "--config", "c.json"])
        .current_dir(dir.path())
        .env("MICROREV_OUTPUT_DIR", &elsewhere)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(elsewhere.join("out.csv").exists());
}

#[test]
fn failing_rows_are_flagged() {
    let dir = tempfile::tempdir().unwrap();
    // far in the fitted tails at low temperature: the Monte Carlo estimator refuses
    let out = microrev(
        dir.path(),
        &[
            "sweep-fig3",
            "--amplitudes-i",
            "-6",
            "--amplitudes-f",
            "0",
            "--beta-list",
            "3",
            "--mc-samples",
            "2000",
        ],
    );
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["failed"], 1);
    let (_, rows) = read_csv(&dir.path().join("fig3.csv"));
    assert_eq!(rows[0]["status"], "ok");
    assert_eq!(rows[1]["status"], "failed");
    assert!(rows[1]["error"].contains("standard deviations"));
    assert!(rows[1]["log_ratio"].is_empty());
}

#[test]
fn upsilon_sweep_balanced_slope_and_small_beta() {
    let dir = tempfile::tempdir().unwrap();
    let out = microrev(dir.path(), &["sweep-upsilon"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("upsilon.csv"));
    assert_eq!(header, expected_header("upsilon"));

    let mut by_beta: HashMap<u64, Vec<&Row>> = HashMap::new();
    for r in rows.iter().filter(|r| r["series"] == "balanced") {
        assert_eq!(num(r, "delta_alpha_sq"), 0.0);
        by_beta.entry(num(r, "beta").to_bits()).or_default().push(r);
    }
    assert_eq!(by_beta.len(), 9);
    for (bits, series) in by_beta {
        let beta = f64::from_bits(bits);
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for r in &series {
            let x = num(r, "alpha_sq_tot");
            sxy += x * num(r, "log_upsilon");
            sxx += x * x;
        }
        let slope = sxy / sxx;
        assert!((slope - (beta.cosh() - 1.0)).abs() < 1e-9, "beta {beta}: {slope}");
    }

    let small: Vec<&Row> = rows.iter().filter(|r| (num(r, "beta") - 0.01).abs() < 1e-15).collect();
    assert_eq!(small.len(), 25);
    for r in small {
        let ratio = num(r, "log_upsilon_per_tot") / num(r, "half_beta_sq");
        assert!((ratio - 1.0).abs() < 0.01, "{ratio}");
    }
    for r in &rows {
        assert!((num(r, "log_upsilon") - num(r, "log_upsilon_theory")).abs() < 1e-9);
    }
}

#[test]
fn upsilon_single_point() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("one.json"),
        r#"{"amplitudes_i": [3.14], "amplitudes_f": [2.17], "nth_list": [3.57], "output_path": "one.csv"}"#,
    )
    .unwrap();
    let out = microrev(
        dir.path(),
        &["sweep-upsilon", "--config", "one.json", "--mc-samples", "50000"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("one.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    let (_, rows) = read_csv(&dir.path().join("one.csv"));
    let r = &rows[0];
    assert!((num(r, "log_upsilon").exp() - 1.57).abs() < 0.05 * 1.57);
    let (mc, se) = (num(r, "mc_log_upsilon"), num(r, "mc_std_error"));
    assert!((mc - num(r, "log_upsilon_theory")).abs() < 4.0 * se);
}

#[test]
fn oracle_check_passes_at_default_dim() {
    let dir = tempfile::tempdir().unwrap();
    let out = microrev(dir.path(), &["oracle-check", "--dim", "40"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let report = stdout_json(&out);
    assert_valid("oracle_report.schema.json", &report);
    assert_eq!(report["passed"], true);
    let checks = report["checks"].as_array().unwrap();
    let gauss = checks.iter().find(|c| c["name"] == "gaussian_equivalence").unwrap();
    assert!(gauss["max_error"].as_f64().unwrap() < 1e-6);
    assert!(checks.iter().all(|c| c["evaluations"].as_u64().unwrap() > 0));
}

#[test]
fn oracle_check_small_dim_reports_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let out = microrev(dir.path(), &["oracle-check", "--dim", "4"]);
    assert_eq!(code(&out), 1);
    let report = stdout_json(&out);
    assert_valid("oracle_report.schema.json", &report);
    let checks = report["checks"].as_array().unwrap();
    let gauss = checks.iter().find(|c| c["name"] == "gaussian_equivalence").unwrap();
    assert_eq!(gauss["passed"], false);
    assert_eq!(gauss["error_kind"], "TruncationTooSmall");
}

#[test]
fn oracle_check_unreachable_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = microrev(dir.path(), &["oracle-check", "--dim", "40", "--tolerance", "1e-20"]);
    assert_eq!(code(&out), 1);
    let report = stdout_json(&out);
    assert_valid("oracle_report.schema.json", &report);
    assert_eq!(report["passed"], false);
    let gauss = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "gaussian_equivalence")
        .unwrap();
    assert_eq!(gauss["passed"], false);
    assert!(gauss["max_error"].as_f64().unwrap() > 1e-20);
    assert!(gauss["error"].is_null());

    assert_eq!(code(&microrev(dir.path(), &["oracle-check", "--dim", "1"])), 2);
}

#[test]
fn experiment_is_deterministic_and_calibrated() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "experiment",
        "--alpha-i",
        "2",
        "--alpha-f",
        "1.5",
        "--nth",
        "1.62",
        "--tau",
        "0.15",
        "--seed",
        "5",
    ];
    let out = microrev(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_valid("experiment_summary.schema.json", &summary);
    assert_eq!(summary["n_samples"], 50_000);
    assert_eq!(summary["within_4_se"], true);

    let csv_path = dir.path().join("experiment.csv");
    let json_path = dir.path().join("experiment.json");
    let file_summary: Value = serde_json::from_str(&fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(file_summary, summary);
    let (header, rows) = read_csv(&csv_path);
    assert_eq!(header, expected_header("experiment"));
    assert_eq!(rows.len(), 1);
    assert_eq!(
        num(&rows[0], "estimate"),
        summary["estimate"]["point"].as_f64().unwrap()
    );

    let (csv1, json1) = (fs::read(&csv_path).unwrap(), fs::read(&json_path).unwrap());
    assert_eq!(code(&microrev(dir.path(), &args)), 0);
    assert_eq!(csv1, fs::read(&csv_path).unwrap());
    assert_eq!(json1, fs::read(&json_path).unwrap());
}

#[test]
fn experiment_with_ten_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out = microrev(
        dir.path(),
        &[
            "experiment",
            "--samples",
            "10",
            "--alpha-i",
            "2",
            "--alpha-f",
            "1.5",
            "--nth",
            "1.62",
            "--tau",
            "0.15",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_valid("experiment_summary.schema.json", &summary);
    let est = &summary["estimate"];
    assert_eq!(est["resample_size"], 10);
    assert!(est["ci_high"].as_f64().unwrap() - est["ci_low"].as_f64().unwrap() > 0.5);

    assert_eq!(
        code(&microrev(
            dir.path(),
            &[
                "experiment",
                "--samples",
                "2",
                "--alpha-i",
                "2",
                "--alpha-f",
                "1",
                "--nth",
                "1",
                "--tau",
                "0.5"
            ]
        )),
        2
    );
}
