//! End-to-end checks of the command-line interface: exit codes, output
//! schemas, manifests, and input immutability.

use std::path::Path;
use std::process::{Command, Output};

use fmc_cli::manifest::RunManifest;

fn fmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fmc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

/// A small instance keeping CLI round trips fast.
fn small_args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![
        "--set",
        "capacity_B=3",
        "--set",
        "max_alloc_C=2",
        "--set",
        "lambda_n=1.0",
    ];
    args.extend_from_slice(extra);
    args
}

#[test]
fn solve_writes_document_with_contract_keys() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("result.json");
    let out_str = out.to_str().unwrap();
    let result = fmc(&small_args(&["--out", out_str, "solve"]));
    assert!(result.status.success(), "stderr: {}", stderr(&result));

    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for key in ["theta", "beta", "policy", "p_reject"] {
        assert!(doc.get(key).is_some(), "missing key {key}");
    }
    assert!(doc["p_reject"].get("weighted").is_some());

    // Manifest alongside, round-tripping losslessly.
    let manifest_path = RunManifest::path_for(&out, false);
    let text = std::fs::read_to_string(&manifest_path).unwrap();
    let parsed = RunManifest::from_json(&text).unwrap();
    let reparsed = RunManifest::from_json(&parsed.to_json()).unwrap();
    assert_eq!(parsed, reparsed);
    assert_eq!(parsed.command, "solve");
    for output in &parsed.outputs {
        assert!(Path::new(output).exists(), "listed output {output} missing");
    }
}

#[test]
fn invalid_capacity_fails_validation_with_exit_1() {
    let result = fmc(&["--set", "capacity_B=0", "solve"]);
    assert_eq!(result.status.code(), Some(1));
    assert!(stderr(&result).contains("capacity_B"));
}

#[test]
fn infeasible_constraint_exits_2() {
    // One resource unit under heavy offered load cannot meet rho = 0.
    let result = fmc(&[
        "--set",
        "capacity_B=1",
        "--set",
        "max_alloc_C=1",
        "--set",
        "lambda_n=8.0",
        "solve",
        "--rho",
        "0.0",
    ]);
    assert_eq!(result.status.code(), Some(2));
    assert!(stderr(&result).contains("infeasible"));
}

#[test]
fn unknown_policy_fails_validation() {
    let result = fmc(&small_args(&["simulate", "--policy", "bogus"]));
    assert_eq!(result.status.code(), Some(1));
}

#[test]
fn config_file_is_never_mutated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("params.cfg");
    let text = "# test config\nlambda_n = 1.0\ncapacity_B = 3\nmax_alloc_C = 2\n";
    std::fs::write(&cfg, text).unwrap();
    let out = dir.path().join("result.json");
    let result = fmc(&[
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "lambda_n=1.5",
        "--out",
        out.to_str().unwrap(),
        "solve",
        "--rho",
        "0.5",
    ]);
    assert!(result.status.success(), "stderr: {}", stderr(&result));
    assert_eq!(std::fs::read_to_string(&cfg).unwrap(), text);
}

#[test]
fn simulate_emits_documented_csv_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.csv");
    let result = fmc(&small_args(&[
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "7",
        "simulate",
        "--policy",
        "au",
        "--events",
        "20000",
        "--warmup",
        "2000",
        "--reps",
        "2",
    ]));
    assert!(result.status.success(), "stderr: {}", stderr(&result));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "lambda_n,policy,replication,avg_reward_per_time,p_reject_nr,p_reject_mr,\
avg_alloc_nr,avg_alloc_mr,avg_distance,interruption_rate,status"
    );
    // 2 replications + mean + hw95 rows.
    assert_eq!(text.lines().count(), 1 + 4);
}

#[test]
fn corrupted_kernel_is_reported_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("compare.manifest.json");
    let out = out.to_str().unwrap();
    let result = fmc(&small_args(&[
        "--out",
        out,
        "compare",
        "--policy",
        "au",
        "--events",
        "20000",
        "--warmup",
        "2000",
        "--reps",
        "2",
        "--corrupt-kernel",
    ]));
    assert_eq!(result.status.code(), Some(1));
    let text = stdout(&result);
    assert!(
        text.contains("FAIL: uniformized-kernel-row-sums"),
        "stdout: {text}"
    );
}

#[test]
fn compare_passes_on_small_instance() {
    // B = 2, C = 1 keeps the instance within the exhaustive-enumeration
    // bounds, so the brute-force cross-check actually runs.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("compare.manifest.json");
    let result = fmc(&[
        "--set",
        "capacity_B=2",
        "--set",
        "max_alloc_C=1",
        "--set",
        "lambda_n=1.0",
        "--seed",
        "11",
        "--out",
        out.to_str().unwrap(),
        "compare",
        "--policy",
        "fixed:1",
        "--events",
        "150000",
        "--warmup",
        "15000",
        "--reps",
        "2",
    ]);
    let text = stdout(&result);
    assert!(result.status.success(), "stdout: {text}\nstderr: {}", stderr(&result));
    // The tiny instance also runs the exhaustive-enumeration cross-check.
    assert!(text.contains("PASS: brute-force-vs-value-iteration"));
    assert!(!text.contains("skipped"), "stdout: {text}");
}

#[test]
fn dump_model_writes_three_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dump");
    let result = fmc(&small_args(&[
        "--out",
        out.to_str().unwrap(),
        "dump-model",
        "--p-rm",
        "0.2",
    ]));
    assert!(result.status.success(), "stderr: {}", stderr(&result));
    let states = std::fs::read_to_string(out.join("states.csv")).unwrap();
    assert!(states.starts_with("index,local,remote,event\n"));
    let kernel = std::fs::read_to_string(out.join("kernel.csv")).unwrap();
    assert!(kernel.starts_with("state,action,next_state,prob\n"));
    let rewards = std::fs::read_to_string(out.join("rewards.csv")).unwrap();
    assert!(rewards.starts_with("state,action,income_g,cost_rate_d,sojourn_y,constraint_f\n"));
    assert!(out.join("run.manifest.json").exists());
}

#[test]
fn dump_mobility_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mob.csv");
    let result = fmc(&["--out", out.to_str().unwrap(), "dump-mobility", "--p-rm", "0.3"]);
    assert!(result.status.success(), "stderr: {}", stderr(&result));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "row,0,1,2,3,T,Dr");
    assert!(text.contains("\noccupancy,"));
    assert!(text.contains("\nmean_distance,"));
    assert!(text.contains("\np_interrupt,"));
}

#[test]
fn seed_changes_simulation_output() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (seed, path) in [("1", &a), ("2", &b)] {
        let result = fmc(&small_args(&[
            "--seed",
            seed,
            "--out",
            path.to_str().unwrap(),
            "simulate",
            "--policy",
            "fixed:1",
            "--events",
            "20000",
            "--warmup",
            "2000",
            "--reps",
            "1",
        ]));
        assert!(result.status.success());
    }
    assert_ne!(
        std::fs::read(&a).unwrap(),
        std::fs::read(&b).unwrap()
    );
}
