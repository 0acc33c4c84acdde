use std::path::Path;
use std::process::{Command, Output};

fn merlang(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_merlang"));
    cmd.args(args).env_remove("MERLANG_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn compute_writes_requested_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = merlang(
        &["compute", "--out", path_str(dir.path()), "--t-max", "1", "--grid-points", "11", "--quantity", "p0", "--quantity", "p_2_3"],
        &[],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("p_2_3.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,value,trunc_error");
    assert_eq!(lines.len(), 12);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("p0.json")).unwrap()).unwrap();
    assert_eq!(json["values"][0], 1.0);
    assert_eq!(json["values"].as_array().unwrap().len(), 11);
}

#[test]
fn empty_quantity_list_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    let out_dir = dir.path().join("out");
    std::fs::write(&config, r#"{"quantities": []}"#).unwrap();
    let out = merlang(&["compute", "--config", path_str(&config), "--out", path_str(&out_dir)], &[]);
    assert_eq!(code(&out), 0);
    assert!(!out_dir.exists());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let o = path_str(&out_dir);
    assert_eq!(code(&merlang(&["compute", "--out", o, "--t-max", "0"], &[])), 2);
    assert_eq!(code(&merlang(&["validate", "--out", o, "--check", "everything"], &[])), 2);
    assert_eq!(code(&merlang(&["compute", "--out", o, "--quantity", "p_1_9"], &[])), 2);
    assert_eq!(code(&merlang(&["compute", "--config", path_str(&dir.path().join("missing.json"))], &[])), 2);
    assert_eq!(code(&merlang(&["simulate", "--out", o, "--paths", "5"], &[("MERLANG_THREADS", "0")])), 2);

    let bad_mix = dir.path().join("mix.json");
    std::fs::write(&bad_mix, r#"{"params": {"lambda": 6, "mu": 5, "k": 4, "c1": 0.4, "c2": 0.7, "alpha1": 0.5, "alpha2": 0.3}}"#)
        .unwrap();
    let out = merlang(&["compute", "--config", path_str(&bad_mix), "--out", o], &[]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));

    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"n_path": 10}"#).unwrap();
    assert_eq!(code(&merlang(&["simulate", "--config", path_str(&unknown), "--out", o], &[])), 2);
}

#[test]
fn simulation_output_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, r#"{"trajectory_formats": ["journal", "csv"], "pmf_times": [0.5, 1.0]}"#).unwrap();
    let late = merlang(&["simulate", "--out", path_str(&dir.path().join("late")), "--paths", "5", "--t-max", "1"], &[]);
    assert_eq!(code(&late), 2, "default pmf time 2 lies beyond t_max = 1");
    let mut journals = Vec::new();
    for threads in ["1", "3"] {
        let out_dir = dir.path().join(format!("threads-{threads}"));
        let out = merlang(
            &["simulate", "--config", path_str(&config), "--out", path_str(&out_dir), "--paths", "300", "--seed", "11", "--t-max", "1"],
            &[("MERLANG_THREADS", threads)],
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let journal = std::fs::read(out_dir.join("trajectories.journal")).unwrap();
        assert_eq!(journal.len() % 24, 0);
        let csv = std::fs::read_to_string(out_dir.join("trajectories.csv")).unwrap();
        assert_eq!(csv.lines().count() - 1, journal.len() / 24);
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out_dir.join("simulation.json")).unwrap()).unwrap();
        assert_eq!(summary["n_paths"], 300);
        journals.push(journal);
    }
    assert_eq!(journals[0], journals[1]);

    // The first record of every path is the empty state at time zero.
    let first = &journals[0][..24];
    assert_eq!(u64::from_le_bytes(first[..8].try_into().unwrap()), 0);
    assert_eq!(f64::from_le_bytes(first[8..16].try_into().unwrap()), 0.0);
}

#[test]
fn validation_report_is_written_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("report");
    let mut reports = Vec::new();
    for _ in 0..2 {
        let out = merlang(
            &["validate", "--out", path_str(&out_dir), "--check", "governing-system", "--check", "special-functions"],
            &[],
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(stdout.contains("PASS governing-system") && stdout.contains("PASS special-functions"));
        reports.push(std::fs::read(out_dir.join("validation.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let report: serde_json::Value = serde_json::from_slice(&reports[0]).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["checks"].as_array().unwrap().len(), 2);
}
