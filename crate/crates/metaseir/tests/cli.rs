//! End-to-end runs of the command-line pipeline against the bundled
//! 5-region fixture.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

fn fixture_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/run.toml")
}

fn run(out: &Path, args: &[&str]) -> std::process::Output {
    let output = Command::new(env!("CARGO_BIN_EXE_metaseir"))
        .arg(args[0])
        .args([
            "--config",
            fixture_config().to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--bootstrap",
            "10",
        ])
        .args(&args[1..])
        .output()
        .expect("spawn metaseir");
    assert!(
        output.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn read(out: &Path, name: &str) -> String {
    std::fs::read_to_string(out.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

#[test]
fn full_pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();

    run(out, &["init-state"]);
    let state = read(out, "state.csv");
    assert!(state.starts_with("date,region_id,S,E,I_T,I_U,R_T,R_U"));
    assert_eq!(state.lines().count(), 6, "header plus five regions");

    run(out, &["estimate"]);
    let estimates = read(out, "estimates.csv");
    let mut keys = BTreeSet::new();
    for line in estimates.lines().skip(1) {
        let mut f = line.split(',');
        let date = f.next().unwrap().to_string();
        let model = f.next().unwrap().to_string();
        assert!(
            keys.insert((date, model)),
            "duplicate (date, model) row: {line}"
        );
    }
    // 46 days x two model variants
    assert_eq!(keys.len(), 46 * 2);
    assert!(estimates.contains("negbin_with_mobility"));
    assert!(estimates.contains("negbin_without_mobility"));
    let replicas = read(out, "replicas.csv");
    assert_eq!(replicas.lines().count(), 1 + 46 * 2 * 10);

    run(out, &["simulate"]);
    let national = read(out, "national.csv");
    assert!(national.starts_with("date,total_new_reported,R_eff"));
    assert_eq!(national.lines().count(), 1 + 46);
    let trajectory = read(out, "trajectory.csv");
    assert_eq!(trajectory.lines().count(), 1 + 46 * 5);

    run(out, &["forecast"]);
    let forecast = read(out, "forecast.csv");
    assert!(forecast.starts_with("issue_date,region_id,point,lo95,hi95,fraction"));
    let issue_dates: BTreeSet<&str> = forecast
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    // issue dates need 7 days of estimates before the init date
    assert!(issue_dates.contains("2020-07-15"));
    assert!(!issue_dates.contains("2020-07-14"));
    for line in forecast.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (point, lo, hi): (f64, f64, f64) =
            (f[2].parse().unwrap(), f[3].parse().unwrap(), f[4].parse().unwrap());
        assert!(lo <= hi, "interval bounds out of order: {line}");
        assert!(point >= 0.0);
    }

    run(out, &["validate"]);
    let validation = read(out, "validation.csv");
    assert!(validation.contains(",initialization,"));
    assert!(validation.contains(",simulation,"));
    let delay = read(out, "delay.csv");
    assert!(delay.starts_with("shift,correlation"));
    assert_eq!(delay.lines().count(), 1 + 22); // shifts 0..=21

    run(out, &["eval"]);
    let metrics = read(out, "metrics.csv");
    assert!(metrics.starts_with("issue_date,model,rmse,spearman"));
    assert!(metrics.lines().count() > 1);
    for line in metrics.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let rmse: f64 = f[2].parse().unwrap();
        let spearman: f64 = f[3].parse().unwrap();
        assert!(rmse >= 0.0);
        assert!((-1.0..=1.0).contains(&spearman));
    }

    run(out, &["compare"]);
    let compare = read(out, "compare.csv");
    assert!(compare.starts_with("date,model,aic_with,aic_without,aic_diff"));
    assert_eq!(compare.lines().count(), 1 + 46);
    for line in compare.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let with: f64 = f[2].parse().unwrap();
        let without: f64 = f[3].parse().unwrap();
        let diff: f64 = f[4].parse().unwrap();
        assert!((without - with - diff).abs() < 1e-9);
    }
}

#[test]
fn same_seed_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for out in [a.path(), b.path()] {
        run(out, &["estimate", "--to", "2020-07-20"]);
        run(out, &["forecast", "--to", "2020-07-25"]);
    }
    for name in ["estimates.csv", "replicas.csv", "forecast.csv"] {
        assert_eq!(
            read(a.path(), name),
            read(b.path(), name),
            "{name} differs between identically seeded runs"
        );
    }
}

#[test]
fn different_seed_changes_intervals() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path(), &["estimate", "--to", "2020-07-10"]);
    run(b.path(), &["estimate", "--to", "2020-07-10", "--seed", "7"]);
    assert_ne!(read(a.path(), "replicas.csv"), read(b.path(), "replicas.csv"));
}

#[test]
fn no_mobility_flag_fits_single_variant() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["estimate", "--no-mobility", "--to", "2020-07-05"]);
    let estimates = read(dir.path(), "estimates.csv");
    assert!(estimates.contains("negbin_without_mobility"));
    assert!(!estimates.contains("negbin_with_mobility"));
    // 5 days, one variant each
    assert_eq!(estimates.lines().count(), 1 + 5);
}

#[test]
fn bad_config_fails_with_error_line() {
    let output = Command::new(env!("CARGO_BIN_EXE_metaseir"))
        .args(["estimate", "--config", "/nonexistent/run.toml"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.lines().any(|l| l.starts_with("error: ")), "{stderr}");
}

#[test]
fn threads_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_metaseir"))
        .args([
            "estimate",
            "--config",
            fixture_config().to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--bootstrap",
            "5",
            "--to",
            "2020-07-05",
        ])
        .env("METASEIR_THREADS", "1")
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
}
