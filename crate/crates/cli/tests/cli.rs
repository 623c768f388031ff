use std::path::Path;
use std::process::{Command, Output};

fn rvsum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rvsum"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn regularity_summarizes_the_mean_matrix() {
    let output = rvsum(&["regularity", "--matrix", "cesaro", "--depth", "1000"]);
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.contains("Regular"), "{text}");
    assert!(text.contains("norm M = 1"), "{text}");
}

#[test]
fn apply_prints_a_step_function_above_one() {
    let output = rvsum(&[
        "apply", "--matrix", "cesaro", "--family", "example1", "--row", "16",
    ]);
    assert!(output.status.success());
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    let values = parsed["values"].as_array().unwrap();
    assert!(!values.is_empty());
    for value in values {
        let v: f64 = value.as_str().unwrap().parse().unwrap();
        assert!(v > 1.0, "every piece of the row-16 mean exceeds 1, got {v}");
    }
}

#[test]
fn experiment_writes_reports_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    std::fs::write(
        &config_path,
        r#"{
            "matrix": {"builtin": "cesaro"},
            "family": {"family": "example1"},
            "modes": [{"mode": "in-probability", "lambda": 1.0, "epsilon": 0.5, "from_index": 16}],
            "indices": {"start": 16, "end": 32}
        }"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let output = rvsum(&[
        "experiment",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    assert!(stdout(&output).contains("Counterexample"));
    assert!(Path::new(&out_dir.join("report.json")).exists());
    assert!(Path::new(&out_dir.join("profile_in_probability.csv")).exists());
}

#[test]
fn usage_errors_map_to_documented_exit_codes() {
    // Unknown family: configuration error.
    let output = rvsum(&[
        "apply", "--matrix", "cesaro", "--family", "nope", "--row", "4",
    ]);
    assert_eq!(output.status.code(), Some(2));

    // Index beyond the family guard: guard violation.
    let output = rvsum(&[
        "profile",
        "--mode",
        "in-probability",
        "--family",
        "example1",
        "--start",
        "500",
        "--end",
        "600",
        "--lambda",
        "1",
    ]);
    assert_eq!(output.status.code(), Some(3));

    // Piece cap exhausted.
    let output = rvsum(&[
        "profile",
        "--mode",
        "in-probability",
        "--matrix",
        "cesaro",
        "--family",
        "example1",
        "--start",
        "16",
        "--end",
        "64",
        "--lambda",
        "1",
        "--piece-cap",
        "4",
    ]);
    assert_eq!(output.status.code(), Some(4));
}
