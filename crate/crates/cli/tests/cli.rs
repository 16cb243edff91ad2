use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn prioreplay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prioreplay"))
        .args(args)
        .output()
        .unwrap()
}

fn run_into(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    prioreplay(&args)
}

#[test]
fn run_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let o = run_into(
        &out,
        &["--mode", "prioritized", "--steps", "250", "--seed", "1"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("telemetry.csv")).unwrap();
    assert_eq!(csv.lines().count(), 251);
    assert!(csv.starts_with("step,"));
    assert!(out.join("checkpoint.txt").exists());
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("steps = 250"));
    assert!(summary.contains("visited = "));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert!(run_into(out, &["--seed", "7", "--steps", "100"])
            .status
            .success());
    }
    for file in ["telemetry.csv", "checkpoint.txt", "summary.txt"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn uniform_baseline_visits_more() {
    let dir = tempfile::tempdir().unwrap();
    let visited = |mode: &str| {
        let out = dir.path().join(mode);
        assert!(run_into(&out, &["--mode", mode, "--seed", "3"])
            .status
            .success());
        let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
        let line = summary.lines().find(|l| l.starts_with("visited")).unwrap();
        line.split('=')
            .nth(1)
            .unwrap()
            .trim()
            .parse::<usize>()
            .unwrap()
    };
    assert!(visited("uniform-baseline") > visited("prioritized"));
}

#[test]
fn existing_output_is_protected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    assert!(run_into(&out, &["--steps", "5"]).status.success());
    let before = fs::read(out.join("telemetry.csv")).unwrap();
    let o = run_into(&out, &["--steps", "9"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(fs::read(out.join("telemetry.csv")).unwrap(), before);
    assert!(run_into(&out, &["--steps", "9", "--force"])
        .status
        .success());
    assert_eq!(
        fs::read_to_string(out.join("telemetry.csv"))
            .unwrap()
            .lines()
            .count(),
        10
    );
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sched.cfg");
    fs::write(&cfg, "# test\nrng_seed = 11\nbatch_size = 6\n").unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = cfg.to_str().unwrap();
    assert!(
        run_into(&a, &["--config", cfg, "--seed", "12", "--steps", "3"])
            .status
            .success()
    );
    let summary = fs::read_to_string(a.join("summary.txt")).unwrap();
    assert!(summary.contains("seed = 12"));
    assert!(fs::read_to_string(a.join("checkpoint.txt"))
        .unwrap()
        .contains("batch_size = 6"));
    assert!(run_into(&b, &["--config", cfg, "--steps", "3"])
        .status
        .success());
    assert!(fs::read_to_string(b.join("summary.txt"))
        .unwrap()
        .contains("seed = 11"));
}

#[test]
fn invalid_config_exits_one_with_every_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "ema_alpha = 1.5\nexploration_rate = 2\n").unwrap();
    let o = run_into(&dir.path().join("a"), &["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.lines().count() >= 2, "{err}");
}

#[test]
fn missing_config_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(
        &dir.path().join("a"),
        &["--config", "/nonexistent/sched.cfg"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_passes() {
    let o = prioreplay(&["verify"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let table = String::from_utf8_lossy(&o.stdout);
    assert_eq!(
        table.lines().filter(|l| l.contains("  pass  ")).count(),
        6,
        "{table}"
    );
}
