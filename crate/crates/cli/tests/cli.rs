use std::path::Path;
use std::process::{Command, Output};

const SMALL_RUN: &str = "d = 2\nm = 1\neta = 0.5\nchains = 40\nh = 0.01\n";

fn sampler(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sampler")).args(args).output().unwrap()
}

fn with_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.txt");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn invoke(cmd: &[&str], cfg: &str, seed: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args: Vec<&str> = cmd.to_vec();
    args.extend(["--config", cfg, "--seed", seed, "--out", out.to_str().unwrap()]);
    args.extend(extra);
    sampler(&args)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn schedule_writes_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_config(dir.path(), SMALL_RUN);
    let out = dir.path().join("s");
    let o = invoke(&["schedule"], &cfg, "3", &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("schedule.csv")).unwrap();
    assert!(csv.starts_with("index,eta,gamma,T,cumulative_T\n"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("schedule.json")).unwrap()).unwrap();
    assert_eq!(json["admissible"], true);
    assert_eq!(json["rungs"].as_u64().unwrap() as usize, csv.lines().count() - 1);
}

#[test]
fn run_is_reproducible_and_thread_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_config(dir.path(), &format!("{SMALL_RUN}trajectory_chains = 2\ntrajectory_stride = 50\n"));
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert_eq!(code(&invoke(&["run"], &cfg, "5", &a, &[])), 0);
    assert_eq!(code(&invoke(&["run"], &cfg, "5", &b, &[])), 0);
    assert_eq!(code(&invoke(&["run"], &cfg, "5", &c, &["--threads", "2"])), 0);
    for file in ["run_samples.csv", "run_trajectory.csv"] {
        let first = std::fs::read(a.join(file)).unwrap();
        assert_eq!(first, std::fs::read(b.join(file)).unwrap(), "{file}");
        assert_eq!(first, std::fs::read(c.join(file)).unwrap(), "{file}");
    }
    let samples = std::fs::read_to_string(a.join("run_samples.csv")).unwrap();
    assert!(samples.starts_with("chain_id,x_1,x_2\n"));
    assert_eq!(samples.lines().count(), 41);
    let traj = std::fs::read_to_string(a.join("run_trajectory.csv")).unwrap();
    assert!(traj.starts_with("chain_id,t,x_1,x_2\n"));
    let ids: std::collections::BTreeSet<&str> = traj.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ids.into_iter().collect::<Vec<_>>(), ["0", "1"]);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("run.json")).unwrap()).unwrap();
    assert_eq!(json["chains"], 40);
    assert_eq!(json["samples_path"], "run_samples.csv");
}

#[test]
fn compressed_sensing_writes_reconstruction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_config(dir.path(), "d = 2\nm = 1\nalgorithm = compressed\nx0 = 0.1, 0.2\nchains = 1\nh = 0.01\n");
    let out = dir.path().join("o");
    let o = invoke(&["run"], &cfg, "1", &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("run_reconstruction.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn experiment_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_config(dir.path(), "draws = 1000\n");
    let out = dir.path().join("e");
    let o = invoke(&["experiment", "amplification"], &cfg, "2", &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("amplification.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 2);
    assert!(out.join("amplification.csv").exists());
}

#[test]
fn validation_failures_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let unknown = with_config(dir.path(), "d = 2\ncolour = blue\n");
    let o = invoke(&["run"], &unknown, "0", &out, &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    let bad_value = with_config(dir.path(), "eta = -1\n");
    assert_eq!(code(&invoke(&["schedule"], &bad_value, "0", &out, &[])), 2);
    assert_eq!(code(&invoke(&["experiment", "no-such"], &bad_value, "0", &out, &[])), 2);
    assert_eq!(code(&invoke(&["run"], "/nonexistent/cfg", "0", &out, &[])), 2);
    assert_eq!(code(&sampler(&["run"])), 2);
}

#[test]
fn divergence_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_config(dir.path(), &format!("{SMALL_RUN}guard = 1e-9\n"));
    let o = invoke(&["run"], &cfg, "0", &dir.path().join("d"), &[]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}
