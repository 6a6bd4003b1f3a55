use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sobolevkit")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn column(text: &str, name: &str) -> Vec<f64> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.filter_map(|l| l.split(',').nth(idx).and_then(|v| v.parse().ok())).collect()
}

#[test]
fn converge_prints_decreasing_errors() {
    let o = run(&["converge", "--f", "abs(x1-0.5)", "--p", "2", "--eps", "0.2,0.1,0.05"]);
    assert!(o.status.success());
    let errors = column(&stdout(&o), "error");
    assert_eq!(errors.len(), 3);
    assert!(errors.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn output_is_byte_identical_across_runs() {
    let args = ["converge", "--f", "sin(2*pi*x1)", "--p", "inf", "--eps", "0.2,0.1"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn flow_residual_is_tiny() {
    let o = run(&["flow", "--k", "1", "--x0", "1", "--s", "0.5", "--t", "0.5"]);
    assert!(o.status.success());
    assert!(column(&stdout(&o), "residual")[0] <= 1e-12);
}

#[test]
fn newton_finds_square_root_of_two() {
    let o = run(&["newton", "--f", "x1^2", "--a", "1.5", "--y", "2", "--x0", "1.5"]);
    assert!(o.status.success());
    let xs = column(&stdout(&o), "x");
    assert!((xs.last().unwrap() - 2f64.sqrt()).abs() < 1e-10);
}

#[test]
fn exit_codes_separate_invalid_input_from_numerical_failure() {
    let bad = run(&["converge", "--f", "sin(x1", "--eps", "0.1"]);
    assert_eq!(bad.status.code(), Some(2));
    let stderr = String::from_utf8(bad.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1);
    assert!(stderr.contains("offset 6"));

    assert_eq!(run(&["converge", "--f", "x1", "--eps", "0.1,0.2"]).status.code(), Some(2));
    assert_eq!(run(&["mollify", "--f", "log(x1)", "--eps", "0.1"]).status.code(), Some(3));
    assert_eq!(run(&["newton", "--f", "x1^2", "--a", "1", "--y", "2", "--x0", "1", "--dfa", "0"]).status.code(), Some(2));
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# study\nf = abs(x1-0.5)\neps = 0.2,0.1,0.05\np = 1\n").unwrap();
    let out = dir.path().join("table.csv");
    let cfg_s = cfg.to_str().unwrap();
    let o = run(&["converge", "--config", cfg_s, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let from_file = std::fs::read_to_string(&out).unwrap();
    assert_eq!(column(&from_file, "error").len(), 3);

    let o = run(&["converge", "--config", cfg_s, "--eps", "0.2,0.1"]);
    assert_eq!(column(&stdout(&o), "error").len(), 2);
}

#[test]
fn weak_verify_and_sobolev_reports() {
    let o = run(&["weak-verify", "--f", "abs(x1-0.5)", "--u", "sign(x1-0.5)"]);
    assert!(o.status.success());
    assert!(column(&stdout(&o), "residual").iter().all(|r| *r <= 1e-4));

    let o = run(&["sobolev", "--f", "x1", "--d", "1=1", "--k", "1", "--p", "2", "--res", "1000"]);
    let text = stdout(&o);
    let summary = text.lines().last().unwrap();
    assert!(summary.starts_with("summary,") && summary.ends_with(",true"));
    let norm: f64 = summary.split(',').nth(2).unwrap().parse().unwrap();
    assert!((norm - (4.0f64 / 3.0).sqrt()).abs() < 1e-4);
}

#[test]
fn compose_and_commute() {
    let o = run(&["compose", "--eps-a", "0.1", "--eps-b", "0.2"]);
    let text = stdout(&o);
    assert!(column(&text, "support_radius")[0] <= 0.301);
    assert!((column(&text, "mass")[0] - 1.0).abs() < 1e-3);

    let o = run(&["commute", "--f", "abs(x1-0.5)", "--u", "sign(x1-0.5)", "--eps", "0.1"]);
    assert!(column(&stdout(&o), "residual")[0] <= 1e-3);
}

#[test]
fn mollify_writes_interior_samples() {
    let o = run(&["mollify", "--f", "3*x1+1", "--eps", "0.1", "--res", "100"]);
    let text = stdout(&o);
    let rows: Vec<(f64, f64)> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let (x, v) = l.split_once(',').unwrap();
            (x.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|(x, v)| *x > 0.1 && *x < 0.9 && (v - (3.0 * x + 1.0)).abs() < 1e-8));
}

#[test]
fn suite_passes() {
    let o = run(&["suite"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("12 of 12"));
}
