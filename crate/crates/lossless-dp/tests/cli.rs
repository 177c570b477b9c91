//! End-to-end checks of the command-line contract: exit codes, output
//! formats, determinism, and the seed environment fallback.

use std::path::PathBuf;
use std::process::{Command, Output};

fn binary() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lossless-dp"));
    cmd.env_remove("LOSSLESS_DP_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("spawn binary")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is utf-8")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lossless-dp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("create scratch dir");
    dir.join(name)
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["release"]).status.code(), Some(2));
    assert_eq!(run(&["fig2", "--grid-log", "5:0.001:20"]).status.code(), Some(2));
    let bad_env = binary()
        .args(["account", "max", "--budgets", "1,2"])
        .env("LOSSLESS_DP_SEED", "not-a-number")
        .output()
        .expect("spawn binary");
    assert_eq!(bad_env.status.code(), Some(2));
}

#[test]
fn help_exits_0() {
    let output = run(&["--help"]);
    assert_eq!(output.status.code(), Some(0));
    for subcommand in ["release", "histogram", "fact-release", "account", "suite", "fig2"] {
        assert!(
            stdout(&output).contains(subcommand),
            "--help does not mention {subcommand}"
        );
    }
}

#[test]
fn invalid_parameters_exit_2() {
    let output = run(&[
        "account",
        "poisson-epsilon",
        "--lambda",
        "300",
        "--delta",
        "1e-6",
        "--unit",
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("precondition"), "unexpected stderr: {stderr}");
}

#[test]
fn account_epsilon_matches_library() {
    let output = run(&[
        "account",
        "poisson-epsilon",
        "--lambda",
        "1000",
        "--delta",
        "1e-6",
        "--unit",
    ]);
    assert_eq!(output.status.code(), Some(0));
    let text = stdout(&output);
    let value: f64 = text
        .lines()
        .find_map(|line| line.strip_prefix("poisson_epsilon,"))
        .expect("epsilon row")
        .parse()
        .expect("numeric epsilon");
    let expect = lossless_dp::account::poisson_epsilon_unit(1000.0, 1e-6, 1).unwrap();
    assert_eq!(value, expect, "CLI disagrees with the library");
}

#[test]
fn fig2_is_deterministic_and_format_aware() {
    let args = [
        "fig2",
        "--reps",
        "2000",
        "--grid-log",
        "0.01:2:4",
        "--seed",
        "42",
    ];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout, "same seed, different bytes");

    let csv = stdout(&first);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("rho,mode,n_releases,empirical_variance,theoretical_variance")
    );
    assert_eq!(lines.count(), 8, "4 grid points x 2 modes");

    let via_env = binary()
        .args(["fig2", "--reps", "2000", "--grid-log", "0.01:2:4"])
        .env("LOSSLESS_DP_SEED", "42")
        .output()
        .expect("spawn binary");
    assert_eq!(first.stdout, via_env.stdout, "env seed differs from --seed");

    let json = run(&[
        "fig2",
        "--reps",
        "2000",
        "--grid-log",
        "0.01:2:4",
        "--seed",
        "42",
        "--format",
        "json",
    ]);
    assert_eq!(json.status.code(), Some(0));
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&json)).expect("valid json");
    assert_eq!(parsed.as_array().map(|a| a.len()), Some(8));
}

#[test]
fn out_flag_writes_the_stdout_bytes() {
    let path = scratch("fig2.csv");
    let args = [
        "fig2",
        "--reps",
        "500",
        "--grid-log",
        "0.1:1:3",
        "--seed",
        "7",
    ];
    let piped = run(&args);
    let to_file = binary()
        .args(args)
        .args(["--out", path.to_str().unwrap()])
        .output()
        .expect("spawn binary");
    assert_eq!(to_file.status.code(), Some(0));
    assert!(to_file.stdout.is_empty(), "--out still wrote to stdout");
    assert_eq!(std::fs::read(&path).unwrap(), piped.stdout);
}

#[test]
fn release_ledger_roundtrip() {
    let path = scratch("gaussian.ledger.json");
    let _ = std::fs::remove_file(&path);
    let create = run(&[
        "release",
        "--ledger",
        path.to_str().unwrap(),
        "--rho",
        "1.0",
        "--mechanism",
        "gaussian",
        "--secret",
        "0.0",
        "--seed",
        "5",
    ]);
    assert_eq!(create.status.code(), Some(0), "{}", String::from_utf8_lossy(&create.stderr));
    let first: serde_json::Value = serde_json::from_str(&stdout(&create)).unwrap();

    let repeat = run(&[
        "release",
        "--ledger",
        path.to_str().unwrap(),
        "--rho",
        "1.0",
        "--seed",
        "99",
    ]);
    assert_eq!(repeat.status.code(), Some(0));
    let again: serde_json::Value = serde_json::from_str(&stdout(&repeat)).unwrap();
    assert_eq!(first, again, "repeated request returned a different answer");

    let sharper = run(&[
        "release",
        "--ledger",
        path.to_str().unwrap(),
        "--rho",
        "4.0",
        "--seed",
        "6",
        "--format",
        "csv",
    ]);
    assert_eq!(sharper.status.code(), Some(0));
    let csv = stdout(&sharper);
    assert!(csv.starts_with("rho,index,value"), "unexpected csv: {csv}");

    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["entries"].as_array().map(|a| a.len()), Some(2));
    assert_eq!(doc["mechanism"], "gaussian");

    let missing = run(&["release", "--ledger", "/nonexistent/ledger.json", "--rho", "1"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn histogram_contract() {
    let input = scratch("hist.json");
    std::fs::write(&input, r#"{"d": 50, "counts": {"3": 8, "11": 5}}"#).unwrap();
    let output = run(&[
        "histogram",
        "--input",
        input.to_str().unwrap(),
        "--budgets",
        "0.5,1.5",
        "--thresholds",
        "3,2",
        "--seed",
        "3",
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(doc["rounds"].as_array().map(|a| a.len()), Some(2));
    let draws = doc["manifest"]["gaussian_draws"].as_u64().unwrap();
    assert!(draws >= 4 && draws % 2 == 0, "draws {draws} not (k+c) x rounds");

    let csv_input = scratch("hist.csv");
    std::fs::write(&csv_input, "index,count\n3,8\n11,5\n").unwrap();
    let no_dimension = run(&[
        "histogram",
        "--input",
        csv_input.to_str().unwrap(),
        "--budgets",
        "0.5",
        "--thresholds",
        "3",
    ]);
    assert_eq!(no_dimension.status.code(), Some(2), "csv input needs --dimension");

    let mismatched = run(&[
        "histogram",
        "--input",
        input.to_str().unwrap(),
        "--budgets",
        "0.5,1.5",
        "--thresholds",
        "3",
    ]);
    assert_eq!(mismatched.status.code(), Some(2), "budget/threshold length mismatch");
}

#[test]
fn fact_release_contract() {
    let matrices = scratch("query.json");
    std::fs::write(
        &matrices,
        r#"{"L": [[1,0],[1,1]], "R": [[1,0],[0,1]]}"#,
    )
    .unwrap();
    let output = run(&[
        "fact-release",
        "--matrices",
        matrices.to_str().unwrap(),
        "--data",
        "2.0,-1.0",
        "--rho",
        "0.5,2.0",
        "--seed",
        "9",
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    let csv = stdout(&output);
    assert!(csv.starts_with("rho,index,value"), "unexpected csv: {csv}");
    assert_eq!(csv.lines().count(), 5, "2 budgets x 2 coordinates + header");
}

#[test]
fn quick_suite_exits_0() {
    let output = run(&["suite", "--quick", "--seed", "11"]);
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    let text = stdout(&output);
    assert!(text.contains("PASS 19/19 checks"), "unexpected summary:\n{text}");
    assert!(!text.contains("FAIL"), "a check failed:\n{text}");
}
