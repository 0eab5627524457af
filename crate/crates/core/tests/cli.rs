use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smoothflow"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, schedule: &str, run: &str) -> String {
    let path = dir.join("cfg.json");
    fs::write(
        &path,
        format!(r#"{{"problem": {{"n_x": 5, "n_A": 8, "n_C": 12, "rng_seed": 3}}, "schedule": {schedule}, "run": {run}}}"#),
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn trajectory_csv_has_expected_header_and_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"name": "power", "gamma": 0.5}"#, r#"{"max_steps": 40}"#);
    let out = run(tmp.path(), &["--config", &cfg, "--out", "res", "solve-sgm"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("res/trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,t,s,mu,f_tilde,f_true,grad_norm,lyapunov,bound,grad_evals"
    );
    assert_eq!(lines.count(), 41);
}

#[test]
fn json_output_carries_envelope() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"name": "exponential", "mu0": 1.0, "lambda": 0.9}"#, r#"{"max_steps": 10}"#);
    let out = run(tmp.path(), &["--config", &cfg, "--out", "res", "--format", "json", "solve-sgm"]);
    assert!(out.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("res/trajectory.json")).unwrap()).unwrap();
    for key in ["config", "version", "series"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn bad_input_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(tmp.path(), &["no-such-command"]).status.code(), Some(2));
    let cfg = write_config(tmp.path(), r#"{"name": "power", "gamma": -1.0}"#, "{}");
    assert_eq!(run(tmp.path(), &["--config", &cfg, "solve-sgm"]).status.code(), Some(2));
    fs::write(tmp.path().join("broken.json"), "{ not json").unwrap();
    assert_eq!(run(tmp.path(), &["--config", "broken.json", "solve-sgm"]).status.code(), Some(2));
}

#[test]
fn strict_mode_reports_schedule_exhaustion() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"name": "exponential", "mu0": 1.0, "lambda": 0.5}"#,
        r#"{"max_steps": 5000}"#,
    );
    let lenient = run(tmp.path(), &["--config", &cfg, "--out", "a", "solve-sgm"]);
    assert_eq!(lenient.status.code(), Some(0));
    let strict = run(tmp.path(), &["--config", &cfg, "--out", "b", "--strict", "solve-sgm"]);
    assert_eq!(strict.status.code(), Some(4));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"name": "continuous_exponential", "mu0": 1.0, "gamma": 2.0}"#,
        r#"{"max_steps": 100, "t_end": 1.3}"#,
    );
    for dir in ["a", "b"] {
        for cmd in ["solve-sgf-rk45", "compare"] {
            assert!(run(tmp.path(), &["--config", &cfg, "--out", dir, cmd]).status.success());
        }
    }
    for file in ["sgf_rk45.csv", "compare.csv"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(file)).unwrap(),
            fs::read(tmp.path().join("b").join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn version_flag_prints_version() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["--version"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
}
