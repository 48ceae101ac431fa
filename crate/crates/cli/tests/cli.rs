use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn driftmle(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_driftmle"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const OU: &str = r#"{
  "model": {"a": "-x", "b": "1", "theta": 2, "x0": 1},
  "scheme": {"n": 1000, "alpha": 0.9, "substeps": 1, "method": "milstein"},
  "experiment": {"ns": [50, 100], "alphas": [0.5, 0.9], "replicates": 12, "master_seed": 17},
  "io": {"out_dir": "out", "formats": ["csv", "json"]}
}"#;

#[test]
fn check_reports_information_and_predicted_std() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "ou.json", OU);
    let o = driftmle(dir.path(), &["check", "--config", "ou.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(!text.contains("FAIL"), "{text}");
    assert!(text.contains("info = E d(xi) = 0.2500000000"), "{text}");
    let predicted = 1000f64.powf(-0.45) / 0.25f64.sqrt();
    assert!(text.contains(&format!("{predicted:.10}")), "{text}");
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/check.json")).unwrap()).unwrap();
    assert!((summary["predicted_std"]["value"].as_f64().unwrap() - predicted).abs() < 1e-12);
}

#[test]
fn estimate_from_a_stored_path() {
    let dir = tempfile::tempdir().unwrap();
    // n = 4, alpha = 0.5: N = 8 steps of 1/8, so theta_hat = (X_N - X_0) / (N/n) = 0.5
    let mut path = String::from("# n=4\n# alpha=0.5\nk,t,x\n");
    for k in 0..=8 {
        path += &format!("{k},{},{}\n", k as f64 / 4.0, k as f64 / 8.0);
    }
    write(dir.path(), "path.csv", &path);
    write(
        dir.path(),
        "m.json",
        r#"{"model": {"a": "1", "b": "1", "theta": 1, "x0": 0}}"#,
    );
    let o = driftmle(dir.path(), &["estimate", "--config", "m.json", "--path", "path.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["result"]["theta_hat"], 0.5);
    assert_eq!(doc["result"]["N_used"], 8);
}

#[test]
fn simulate_then_estimate_matches_direct_estimate() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "ou.json", OU);
    let args = ["--config", "ou.json", "--n", "50", "--alpha", "0.5", "--seed", "3"];
    let o = driftmle(dir.path(), &[&["simulate"], &args[..]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stored = driftmle(
        dir.path(),
        &[&["estimate", "--path", "out/path.csv"], &args[..]].concat(),
    );
    let direct = driftmle(dir.path(), &[&["estimate"], &args[..]].concat());
    let stored: Value = serde_json::from_str(&stdout(&stored)).unwrap();
    let direct: Value = serde_json::from_str(&stdout(&direct)).unwrap();
    assert_eq!(stored["result"], direct["result"]);
    let csv = fs::read_to_string(dir.path().join("out/estimate.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "seed,n,alpha,method,theta_hat,Dn,N_used");
    assert!(rows[1].starts_with("3,50,0.5,milstein,"), "{}", rows[1]);
}

#[test]
fn experiment_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "ou.json", OU);
    let mut outputs = Vec::new();
    for threads in ["1", "4", "16"] {
        let o = driftmle(dir.path(), &["experiment", "--config", "ou.json", "--threads", threads]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((
            fs::read(dir.path().join("out/replicates.csv")).unwrap(),
            fs::read(dir.path().join("out/summary.json")).unwrap(),
        ));
    }
    assert!(outputs.iter().all(|o| *o == outputs[0]));
    let csv = String::from_utf8(outputs[0].0.clone()).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "case,n,alpha,replicate,seed,theta_hat,Dn,std_err,status");
    assert_eq!(rows.len(), 1 + 4 * 12);
}

#[test]
fn echoed_config_reproduces_outputs() {
    let first = tempfile::tempdir().unwrap();
    write(first.path(), "ou.json", OU);
    let o = driftmle(
        first.path(),
        &[
            "experiment",
            "--config",
            "ou.json",
            "--seed",
            "99",
            "--n",
            "80",
            "--replicates",
            "5",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let echoed = fs::read_to_string(first.path().join("out/config.json")).unwrap();
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(first.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"], serde_json::from_str::<Value>(&echoed).unwrap());
    assert_eq!(summary["config"]["experiment"]["ns"], serde_json::json!([80]));

    let second = tempfile::tempdir().unwrap();
    write(second.path(), "echo.json", &echoed);
    let o = driftmle(second.path(), &["experiment", "--config", "echo.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["replicates.csv", "summary.json", "config.json"] {
        assert_eq!(
            fs::read(first.path().join("out").join(name)).unwrap(),
            fs::read(second.path().join("out").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn config_errors_exit_1_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "bad.json",
        r#"{"model": {"a": "-x", "b": "1", "theta": 2, "x0": 0}, "scheme": {"n": 10, "alfa": 0.5}}"#,
    );
    let o = driftmle(dir.path(), &["check", "--config", "bad.json", "--json-errors"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert_eq!(err["field"], "scheme.alfa");

    let o = driftmle(dir.path(), &["experiment", "--json-errors"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["field"], "model");

    let o = driftmle(dir.path(), &["simulate", "--method", "rk4"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(driftmle(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn assumption_failures_exit_2_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "zero.json",
        r#"{"model": {"a": "0", "b": "1", "theta": 2, "x0": 0}}"#,
    );
    let o = driftmle(dir.path(), &["check", "--config", "zero.json", "--json-errors"]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err["failed"].as_array().unwrap().contains(&Value::from("A6")), "{err}");
    let o = driftmle(dir.path(), &["check", "--config", "zero.json", "--force"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn numerical_failures_exit_3_and_leave_no_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "cubic.json",
        r#"{"model": {"a": "x^3", "b": "1", "theta": 2, "x0": 1},
            "scheme": {"n": 100, "alpha": 0.5},
            "experiment": {"ns": [100], "alphas": [0.5], "replicates": 4, "master_seed": 1},
            "io": {"out_dir": "out"}}"#,
    );
    let o = driftmle(dir.path(), &["experiment", "--config", "cubic.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = driftmle(
        dir.path(),
        &["experiment", "--config", "cubic.json", "--force", "--json-errors"],
    );
    assert_eq!(o.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "numerical");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn table_prints_fresh_and_published_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = driftmle(
        dir.path(),
        &[
            "table",
            "--case",
            "2",
            "--cell",
            "n=100,alpha=0.5",
            "--replicates",
            "10",
            "--seed",
            "5",
            "--out",
            "t",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("Table 2: a(x) = -atan(x), b(x) = 1"), "{text}");
    assert!(text.contains("[2.10459]") && text.contains("[0.69484]"), "{text}");
    let doc: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("t/table.json")).unwrap()).unwrap();
    let cell = &doc["cases"][0]["cells"][0];
    assert_eq!(cell["published_mean"], 2.10459);
    assert_eq!(cell["replicates"], 10);

    let o = driftmle(dir.path(), &["table", "--case", "4"]);
    assert_eq!(o.status.code(), Some(1));
}
