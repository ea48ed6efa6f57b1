//! End-to-end checks of the `duelrank` binary.

use std::path::Path;
use std::process::{Command, Output};

fn duelrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_duelrank"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// CSV with the wall-clock column dropped from every line.
fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|line| line.rsplit_once(',').expect("csv line").0)
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn simulate_is_deterministic_given_a_seed() {
    let args = [
        "simulate", "--mode", "duel", "--algo", "paper", "--gen", "sparse", "--d", "6", "--s",
        "2", "--reps", "4", "--seed", "11", "--profile", "ci",
    ];
    let a = duelrank(&args);
    let b = duelrank(&args);
    assert!(a.status.success());
    let a_csv = strip_wall_time(&String::from_utf8(a.stdout).unwrap());
    let b_csv = strip_wall_time(&String::from_utf8(b.stdout).unwrap());
    assert_eq!(a_csv, b_csv);
    assert!(a_csv.starts_with("algo,n,d,s,delta,epsilon,rep,seed,queries,correct"));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.conf");
    std::fs::write(
        &config,
        "# two-expert duel\nmode = duel\nalgo = borda\ngen = chain\nn = 2\nd = 4\ngaps = 0.6\nreps = 3\nseed = 5\nprofile = ci\n",
    )
    .unwrap();
    let out = duelrank(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--reps",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    // 2 replications from the flag override, borda from the file.
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(1).unwrap().starts_with("borda,2,4,-1,"));
}

#[test]
fn unknown_config_key_fails() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "modee = duel\n").unwrap();
    let out = duelrank(&["simulate", "--config", config.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown config key"));
}

#[test]
fn sweep_sparsity_emits_svg() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("sweep.svg");
    let out = duelrank(&[
        "sweep", "sparsity", "--d", "3", "--reps", "2", "--seed", "3", "--profile", "ci",
        "--format", "svg", "--out", svg.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 2);
}

#[test]
fn bounds_reads_matrix_files(){
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("m.txt");
    std::fs::write(&matrix, "2 2\n1 1\n0.5 0.5\n").unwrap();
    let out = duelrank(&[
        "bounds", "--matrix", matrix.to_str().unwrap(), "--delta", "0.1",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("pair_h:     4.0000"), "{text}");
}

#[test]
fn bad_flags_exit_nonzero() {
    assert!(!duelrank(&["simulate", "--mode", "nope"]).status.success());
    assert!(!duelrank(&["simulate", "--gen", "sparse", "--d", "4", "--s", "9"])
        .status
        .success());
    assert!(!duelrank(&["bounds", "--matrix", "/nonexistent/m.txt"])
        .status
        .success());
    assert!(!Path::new("/nonexistent/m.txt").exists());
}
