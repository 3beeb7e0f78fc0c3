use std::path::Path;
use std::process::{Command, Output};

use lmb_peecs::harness::{
    read_csv, round_sig9, run_monte_carlo, trial_rows, AggregateRow, RunConfig, TrialRow,
};

const SMALL: &str = "n_trials = 2\nn_scans = 4\nseed = 3\nbirth_particles = 100\n[truncation]\nmax_particles = 100\n";

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmb-peecs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn default_config_is_valid_toml() {
    let out = cli(&["default-config"]);
    assert!(out.status.success());
    let cfg = RunConfig::from_toml_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg, RunConfig::default());
}

#[test]
fn run_writes_csvs_that_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_config(tmp.path(), SMALL);
    let out_dir = tmp.path().join("out");
    let out = cli(&[
        "run",
        "--config",
        &cfg_path,
        "--out",
        out_dir.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let agg: Vec<AggregateRow> = read_csv(&out_dir.join("aggregate.csv")).unwrap();
    assert_eq!(agg.len(), 4);
    let text = std::fs::read_to_string(out_dir.join("aggregate.csv")).unwrap();
    assert_eq!(text.lines().count(), 4 + 1);
    let header = std::fs::read_to_string(out_dir.join("trial_000.csv")).unwrap();
    assert_eq!(
        header.lines().next().unwrap(),
        "k,sensor_x,sensor_y,n_true,n_est,ospa_total,ospa_loc,ospa_card"
    );

    let cfg = RunConfig::from_toml_str(SMALL).unwrap();
    let mc = run_monte_carlo(&cfg).unwrap();
    for rec in &mc.records {
        let back: Vec<TrialRow> =
            read_csv(&out_dir.join(format!("trial_{:03}.csv", rec.trial))).unwrap();
        let expected: Vec<TrialRow> = trial_rows(rec)
            .into_iter()
            .map(|r| TrialRow {
                sensor_x: round_sig9(r.sensor_x),
                sensor_y: round_sig9(r.sensor_y),
                ospa_total: round_sig9(r.ospa_total),
                ospa_loc: round_sig9(r.ospa_loc),
                ospa_card: round_sig9(r.ospa_card),
                ..r
            })
            .collect();
        assert_eq!(back, expected);
    }
    assert!(!out_dir.join("errors.svg").exists());
    assert!(!out_dir.join("trajectory.svg").exists());
}

#[test]
fn plots_only_with_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_config(tmp.path(), SMALL);
    let out_dir = tmp.path().join("plots");
    let out = cli(&[
        "run",
        "--config",
        &cfg_path,
        "--out",
        out_dir.to_str().unwrap(),
        "--plot",
        "--trials",
        "1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in ["errors.svg", "trajectory.svg"] {
        let svg = std::fs::read_to_string(out_dir.join(name)).unwrap();
        assert!(svg.starts_with("<svg"), "{name}");
    }
    assert!(!out_dir.join("trial_001.csv").exists());
}

#[test]
fn compare_writes_both_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_config(tmp.path(), SMALL);
    let out_dir = tmp.path().join("cmp");
    let out = cli(&[
        "compare",
        "--config",
        &cfg_path,
        "--trials",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out_dir.join("lmb-peecs/aggregate.csv").exists());
    assert!(out_dir.join("cbmember-peecs/aggregate.csv").exists());
    let text = std::fs::read_to_string(out_dir.join("comparison.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn mode_flag_selects_filter() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_config(tmp.path(), SMALL);
    let out_dir = tmp.path().join("cb");
    let out = cli(&[
        "run",
        "--config",
        &cfg_path,
        "--mode",
        "cbmember-peecs",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("cbmember-peecs"));
}

#[test]
fn errors_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cli(&["run", "--config", "/nonexistent/cfg.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/cfg.toml"));

    let bad = write_config(tmp.path(), "n_scans = 0\n");
    assert!(!cli(&["run", "--config", &bad]).status.success());

    let good = write_config(tmp.path(), SMALL);
    assert!(!cli(&["run", "--config", &good, "--mode", "glmb"])
        .status
        .success());

    // Output path blocked by a regular file.
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = cli(&[
        "run",
        "--config",
        &good,
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("file/sub"));
}
