//! Exit-code and output-format contracts for the `ncp-eq` binary.

use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncp-eq"))
        .args(args)
        .output()
        .expect("run binary")
}

fn run_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncp-eq"))
        .args(args)
        .env(key, value)
        .output()
        .expect("run binary")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_temp(name: &str, contents: &str) -> std::path::PathBuf {
    let path = std::env::temp_dir().join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn solve_converged_exits_zero() {
    let out = run(&["solve", "fixtures/murphy5.json"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("Converged"), "{text}");
    assert!(text.contains("total supply"), "{text}");
    assert!(text.contains("market price"), "{text}");
    assert!(text.contains("kkt residual"), "{text}");
}

#[test]
fn solve_json_summary_is_parseable() {
    let out = run(&["solve", "fixtures/murphy5.json", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["status"], "converged");
    assert_eq!(v["solution"].as_array().unwrap().len(), 5);
    let total = v["total_supply"].as_f64().unwrap();
    assert!((total - 49.8890).abs() < 1e-3, "total supply {total}");
}

#[test]
fn max_iter_flag_forces_iteration_limit_exit() {
    let out = run(&["solve", "fixtures/murphy5.json", "--max-iter", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_file_and_invalid_config_exit_one() {
    let out = run(&["solve", "does_not_exist.json"]);
    assert_eq!(out.status.code(), Some(1));

    let bad = write_temp(
        "ncp_eq_cli_bad_max_iter.json",
        r#"{"problem": "scalar_quad", "initial_point": [3.0],
            "solver": {"max_iter": 0}}"#,
    );
    let out = run(&["solve", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_iter"));

    let unknown = write_temp(
        "ncp_eq_cli_unknown_key.json",
        r#"{"problem": "scalar_quad", "initial_point": [3.0], "mystery": 1}"#,
    );
    let out = run(&["solve", unknown.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn compare_reports_both_methods() {
    let out = run(&["compare", "fixtures/murphy5.json", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["modified_newton"]["status"], "converged");
    assert_eq!(v["classical_newton"]["status"], "converged");
    assert!(v["agreement_norm"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn order_scalar_quad_reports_second_order() {
    let out = run(&["order", "fixtures/scalar_quad.json", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let orders = v["per_step_orders"].as_array().unwrap();
    let last = orders.last().unwrap().as_f64().unwrap();
    assert!((1.8..=2.2).contains(&last), "estimated order {last}");
}

#[test]
fn order_with_tiny_trace_reports_insufficient_data() {
    // Starting on top of the root leaves no usable error norms.
    let cfg = write_temp(
        "ncp_eq_cli_at_root.json",
        r#"{"problem": "scalar_quad", "initial_point": [2.0],
            "solver": {"method": "classical_newton"}}"#,
    );
    let out = run(&["order", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(6));
}

#[test]
fn check_passes_and_corrupt_hook_fails() {
    let out = run(&["check", "fixtures/murphy5.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("tolerance"), "{text}");

    let out = run_env(
        &["check", "fixtures/murphy5.json"],
        "NCP_EQ_CORRUPT_JACOBIAN",
        "1",
    );
    assert_eq!(out.status.code(), Some(5));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn normalized_config_round_trips() {
    use ncp_eq::config::RunConfig;
    use std::str::FromStr;
    let text = std::fs::read_to_string("fixtures/murphy5.json").unwrap();
    let cfg = RunConfig::from_str(&text).unwrap();
    let reparsed = RunConfig::from_str(&cfg.to_normalized_json()).unwrap();
    assert_eq!(cfg, reparsed);
}

#[test]
fn trace_file_has_header_and_full_precision_rows() {
    let path = std::env::temp_dir().join("ncp_eq_cli_trace.csv");
    let out = run(&[
        "solve",
        "fixtures/murphy5.json",
        "--trace",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let trace = std::fs::read_to_string(&path).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "k,z_1,z_2,z_3,z_4,z_5,n_1");
    let first = lines.next().unwrap();
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields.len(), 7);
    assert_eq!(fields[0], "1");
    // 16 digits after the decimal point, scientific notation.
    for f in &fields[1..] {
        let mantissa = f.split('e').next().unwrap();
        let digits = mantissa.split('.').nth(1).unwrap();
        assert_eq!(digits.len(), 16, "field {f}");
    }
}
