//! Command-line contract tests: exit codes, file sets, determinism of
//! `generate`, and the `--only` restriction.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uwp"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.ini");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = "[synthgen]\nn_cz = 12\nn_workers = 6000\nseed = 11\n\
                     [decomposition]\nmoments = false\ndvs = level\n";

#[test]
fn unknown_config_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[synthgen]\nnot_a_key = 1\n");
    let status = bin()
        .args(["generate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn invalid_dgp_exits_1_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[synthgen]\nn_workers = 0\n");
    let out = dir.path().join("out");
    let status = bin()
        .args(["generate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn missing_panel_exits_2_and_marks_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["decompose", "--panel"])
        .arg(dir.path().join("nowhere"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(out.join("FAILED").exists());
}

#[test]
fn generate_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for name in ["a", "b"] {
        let status = bin()
            .args(["generate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join(name))
            .status()
            .unwrap();
        assert!(status.success());
    }
    for file in [
        "panel_prev.csv",
        "panel_curr.csv",
        "cz_table.csv",
        "cpi.csv",
        "ground_truth/psi_by_cz.csv",
        "ground_truth/mu_by_firm.csv",
        "ground_truth/worker_terms.csv",
        "params_echo.ini",
    ] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical-seed runs");
    }
}

#[test]
fn decompose_emits_the_full_file_set() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[synthgen]\nn_cz = 12\nn_workers = 6000\nseed = 11\n",
    );
    let panel = dir.path().join("panel");
    assert!(bin()
        .args(["generate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&panel)
        .status()
        .unwrap()
        .success());
    let out = dir.path().join("out");
    assert!(bin()
        .args(["decompose", "--config"])
        .arg(&cfg)
        .arg("--panel")
        .arg(&panel)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    for dv in ["level", "log", "growth"] {
        for sample in ["all", "stayers"] {
            assert!(out.join(format!("panel_a_{dv}_{sample}.csv")).exists());
            assert!(out.join(format!("panel_b_{dv}_{sample}.csv")).exists());
        }
    }
    for file in [
        "ee_regressions.csv",
        "self_flow_rates.csv",
        "firm_fe_projection.csv",
        "moments_level_all.csv",
        "fe_bins_baseline_level_all.csv",
        "fe_values_coworkers_firm_fe_level_all.csv",
        "filter_report.csv",
        "convergence_log.csv",
        "run_metadata.csv",
        "summary.txt",
    ] {
        assert!(out.join(file).exists(), "{file} missing");
    }
}

#[test]
fn only_baseline_gives_single_cell_without_change_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let panel = dir.path().join("panel");
    assert!(bin()
        .args(["generate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&panel)
        .status()
        .unwrap()
        .success());
    let out = dir.path().join("out");
    assert!(bin()
        .args(["decompose", "--config"])
        .arg(&cfg)
        .arg("--panel")
        .arg(&panel)
        .arg("--out")
        .arg(&out)
        .args(["--only", "baseline"])
        .status()
        .unwrap()
        .success());
    let panel_b = std::fs::read_to_string(out.join("panel_b_level_all.csv")).unwrap();
    let lines: Vec<&str> = panel_b.trim_end().lines().collect();
    assert_eq!(lines.len(), 2, "header plus the baseline row:\n{panel_b}");
    assert!(lines[1].starts_with("baseline_level_all"));
    assert!(lines[1].ends_with(",,"), "no change columns for the baseline");
}

#[test]
fn prepare_writes_stats_and_filter_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let panel = dir.path().join("panel");
    assert!(bin()
        .args(["generate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&panel)
        .status()
        .unwrap()
        .success());
    let out = dir.path().join("prep");
    assert!(bin()
        .args(["prepare", "--config"])
        .arg(&cfg)
        .arg("--panel")
        .arg(&panel)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let stats = std::fs::read_to_string(out.join("coworker_stats.csv")).unwrap();
    assert!(stats.starts_with(
        "worker_id,y1_plus,y1_minus,y2_plus,y2_minus,team_size,no_coworkers,mean"
    ));
    assert!(out.join("prepared_pairs.csv").exists());
    assert!(out.join("filter_report.csv").exists());
    assert!(out.join("run_metadata.csv").exists());
}
