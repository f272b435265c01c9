//! End-to-end runs of the installed binary: exit codes, stream separation
//! (tables and CSV on stdout, diagnostics on stderr), and output files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_netcp"))
}

fn shipped_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        r#"
[graph]
nodes = 2
edges = [[1, 2]]

[priors]
rho = 0.15

[densities]
node_default = { family = "gaussian", mean_pre = 1.0, mean_post = 0.0, variance = 1.0 }
edge_default = { family = "gaussian", mean_pre = 1.0, mean_post = 0.0, variance = 1.0 }

[experiment]
trials = 20
seed = 99
rules = ["mp", "single"]
alpha_grid = [0.2, 0.05]
n_max = "auto"

[[experiment.functional]]
label = "first"
subset = [1]

[[experiment.functional]]
label = "both"
subset = [1, 2]
"#,
    )
    .expect("write config");
    path
}

#[test]
fn no_arguments_is_a_usage_error() {
    let out = bin().output().expect("spawn");
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("Usage"), "{}", stderr_of(&out));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = bin()
        .args(["simulate", "--nonsense"])
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_a_runtime_error() {
    let out = bin()
        .args(["simulate", "--config", "/nonexistent/nowhere.toml"])
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).starts_with("error:"), "{}", stderr_of(&out));
}

#[test]
fn simulate_writes_csv_and_summary() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = small_config(dir.path());
    let csv_path = dir.path().join("results.csv");
    let log_path = dir.path().join("trials.csv");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&csv_path)
        .arg("--trial-log")
        .arg(&log_path)
        .arg("--threads")
        .arg("1")
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));

    let csv = std::fs::read_to_string(&csv_path).expect("csv written");
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some(netcp::AGGREGATE_HEADER),
        "exact aggregate header"
    );
    assert_eq!(lines.count(), 8, "2 functionals x 2 rules x 2 alphas");

    let log = std::fs::read_to_string(&log_path).expect("log written");
    assert!(log.starts_with(
        "functional,rule,alpha,trial,lambda_star,tau,phi,delay,false_alarm,censored\n"
    ));
    // every cell logs every trial
    assert_eq!(log.lines().count(), 1 + 8 * 20);

    let stdout = stdout_of(&out);
    assert!(stdout.contains("resolved config:"), "config echo on stdout");
    assert!(stdout.contains("functional"), "summary table on stdout");
}

#[test]
fn simulate_without_any_output_path_fails_cleanly() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = small_config(dir.path());
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("output"), "{}", stderr_of(&out));
}

#[test]
fn posterior_streams_csv_on_stdout_and_diagnostics_on_stderr() {
    let out = bin()
        .args(["posterior", "--config"])
        .arg(shipped_config("star.toml"))
        .args(["--subset", "2", "--alpha", "0.1", "--seed", "5"])
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let stdout = stdout_of(&out);
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("n,gamma,stopped"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    for (i, row) in rows.iter().enumerate() {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 3, "row {row}");
        assert_eq!(fields[0], (i + 1).to_string());
        let gamma: f64 = fields[1].parse().expect("gamma parses");
        assert!((0.0..=1.0).contains(&gamma));
        // the trajectory ends at the stop and only that row is flagged
        let expect_flag = if i + 1 == rows.len() { "1" } else { "0" };
        assert_eq!(fields[2], expect_flag, "row {row}");
    }
    let stderr = stderr_of(&out);
    assert!(stderr.contains("resolved config:"), "echo goes to stderr");
}

#[test]
fn theory_prints_constants_and_unit_labeled_csv() {
    let out = bin()
        .args(["theory", "--config"])
        .arg(shipped_config("star.toml"))
        .args(["--subset", "1,3"])
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let stdout = stdout_of(&out);
    assert!(stdout.contains("1.651908"), "single-node slope:\n{stdout}");
    assert!(stdout.contains("0.584549"), "adjacent-pair slope:\n{stdout}");
    assert!(
        stdout.contains("label,subset,info_nats,prior_exponent_nats,slope_steps_per_nat"),
        "units recorded in CSV header:\n{stdout}"
    );
    // the extra non-adjacent pair gets its own row: two 0.5-nat nodes, no
    // edge inside the subset
    assert!(stdout.contains("1+3"), "extra subset listed:\n{stdout}");
}

#[test]
fn validate_runs_all_checks_and_exits_zero() {
    let out = bin().arg("validate").output().expect("spawn");
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let stdout = stdout_of(&out);
    assert_eq!(
        stdout.matches("PASS").count(),
        7,
        "one line per check:\n{stdout}"
    );
    assert!(stdout.contains("all 7 checks passed"), "{stdout}");
}
