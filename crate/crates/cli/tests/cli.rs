use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fishbone(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fishbone"))
        .args(args)
        .arg("--out-dir")
        .arg(out_dir)
        .output()
        .unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines
        .next()
        .unwrap()
        .split(',')
        .position(|h| h == name)
        .unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn simulate_writes_growing_torsion() {
    let dir = tempfile::tempdir().unwrap();
    let out = fishbone(&["simulate", "--amplitude", "1.47"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,y_1,ydot_1,z_1,zdot_1,E_total,E_drift\n"));
    let t = column(&csv, "t");
    let z = column(&csv, "z_1");
    let late = t
        .iter()
        .zip(&z)
        .filter(|(t, _)| **t >= 50.0)
        .map(|(_, z)| z.abs())
        .fold(0.0, f64::max);
    assert!(late > 1e-2, "max |z_1| after t = 50 is {late}");
    for name in ["trajectory_y.svg", "trajectory_z.svg"] {
        assert!(fs::read_to_string(dir.path().join(name))
            .unwrap()
            .contains("<polyline"));
    }
}

#[test]
fn zero_state_gives_zero_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = fishbone(
        &[
            "simulate",
            "--modes",
            "2",
            "--amplitude",
            "0",
            "--horizon",
            "5",
            "--format",
            "csv",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    for line in csv.lines().skip(1) {
        assert!(line.split(',').skip(1).all(|v| v == "0.0"), "{line}");
    }
    assert!(!dir.path().join("trajectory_y.svg").exists());
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--modes",
        "2",
        "--mode",
        "2",
        "--amplitude",
        "0.95",
        "--horizon",
        "30",
    ];
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(fishbone(&args, &a).status.success());
    assert!(fishbone(&args, &b).status.success());
    for name in ["trajectory.csv", "trajectory_y.svg", "trajectory_z.svg"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    fs::write(
        &config,
        "# two modes\nmodes = 2\nmode = 2\namplitude = 0.9\nhorizon = 10\nformat = csv\n",
    )
    .unwrap();
    let from_file = dir.path().join("file");
    let from_flags = dir.path().join("flags");
    assert!(fishbone(
        &["simulate", "--config", config.to_str().unwrap()],
        &from_file
    )
    .status
    .success());
    let flags = [
        "simulate",
        "--modes",
        "2",
        "--mode",
        "2",
        "--amplitude",
        "0.9",
        "--horizon",
        "10",
        "--format",
        "csv",
    ];
    assert!(fishbone(&flags, &from_flags).status.success());
    assert_eq!(
        fs::read(from_file.join("trajectory.csv")).unwrap(),
        fs::read(from_flags.join("trajectory.csv")).unwrap()
    );
    let overridden = dir.path().join("overridden");
    let out = fishbone(
        &[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--horizon",
            "2",
        ],
        &overridden,
    );
    assert!(out.status.success());
    let t = column(
        &fs::read_to_string(overridden.join("trajectory.csv")).unwrap(),
        "t",
    );
    assert_eq!(*t.last().unwrap(), 2.0);
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["simulate", "--gamma", "-1"][..],
        &["simulate", "--modes", "0"],
        &["simulate", "--mode", "2"],
        &["simulate", "--variant", "floppy"],
        &["simulate", "--rel-tol", "abc"],
        &[
            "threshold",
            "--bracket-lo",
            "1.5",
            "--bracket-hi",
            "1.6",
            "--horizon",
            "50",
        ],
        &["signchange", "--runs", "0"],
        &["simulate", "--no-such-flag", "1"],
    ] {
        let out = fishbone(args, dir.path());
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn bracket_failure_reports_both_ends() {
    let dir = tempfile::tempdir().unwrap();
    let out = fishbone(
        &["threshold", "--bracket-lo", "1.0", "--bracket-hi", "1.2"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("lo unstable: false") && err.contains("hi unstable: false"),
        "{err}"
    );
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = fishbone(
        &[
            "simulate",
            "--rel-tol",
            "1e-3",
            "--abs-tol",
            "1e-3",
            "--energy-budget",
            "1e-15",
            "--format",
            "csv",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("trajectory.csv").exists());
}

#[test]
fn threshold_second_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out = fishbone(&["threshold", "--modes", "2", "--mode", "2"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = fs::read_to_string(dir.path().join("threshold_summary.txt")).unwrap();
    let line = summary
        .lines()
        .find(|l| l.starts_with("threshold amplitude"))
        .unwrap();
    let value: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!((0.93..=0.96).contains(&value), "{summary}");
    let runs = fs::read_to_string(dir.path().join("threshold_runs.csv")).unwrap();
    assert!(runs.starts_with("amplitude,unstable,onset_time,max_torsion\n"));
}

#[test]
fn analyze_reports_thresholds_tables_and_period() {
    let dir = tempfile::tempdir().unwrap();
    let out = fishbone(&["analyze", "--energy-points", "20"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("235/294 ≈ 0.799"), "{stdout}");
    assert!(stdout.contains("13/24 ≈ 0.542"));
    assert!(stdout.contains("5024/867 ≈ 5.795"));
    assert!(stdout.contains("598 298 238 178 118 58 28"));
    assert!(stdout.contains("T_1(0) = 3.6276"));
    let period = fs::read_to_string(dir.path().join("period.csv")).unwrap();
    let first: Vec<&str> = period.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&first[..2], ["0.0", "1"]);
    assert_eq!(format!("{:.4}", first[2].parse::<f64>().unwrap()), "3.6276");
    let verdicts = fs::read_to_string(dir.path().join("verdicts.csv")).unwrap();
    assert_eq!(verdicts.lines().count(), 1 + 20 * (1 + 2 + 2));
    for name in [
        "thresholds.csv",
        "period.svg",
        "negligibility_modes.csv",
        "negligibility_energy.csv",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn small_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = fishbone(&["trigerror"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("R_s 4.6e-4"));
    assert_eq!(
        fs::read_to_string(dir.path().join("trigerror.csv"))
            .unwrap()
            .lines()
            .count(),
        5
    );

    let out = fishbone(
        &[
            "scaling",
            "--gamma",
            "4",
            "--amplitude",
            "0.5",
            "--horizon",
            "100",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    assert!(column(&csv, "energy_error")[0] < 1e-8);
    assert!(column(&csv, "sup_error")[0] < 1e-6);

    let out = fishbone(
        &["signchange", "--runs", "4", "--horizon", "50"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("signchange.csv")).unwrap();
    assert!(column(&csv, "min_zeros").iter().all(|z| *z >= 1.0));
    assert!(column(&csv, "energy").iter().all(|e| *e <= 10.0));
}
