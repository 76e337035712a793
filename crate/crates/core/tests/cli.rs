use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use creditlab::io::parse_rollout_log;
use creditlab::io::{analyze, AnalyzeOptions};

const SMALL: &str = r#"{
  "mode": "eapo",
  "queries_per_step": 8,
  "ppo_mini_batch": 16,
  "total_steps": 3,
  "dump_interval": 1,
  "eval_n": 4,
  "family": {"modulus": 7, "horizon": 3, "min_success": 0.05, "max_success": 0.5}
}"#;

fn creditlab(args: &[&str], out_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_creditlab"))
        .args(args)
        .env("CREDITLAB_OUT", out_root)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn train_analyze_report_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let run = tmp.path().join("run");
    let out = creditlab(&["train", "--config", &cfg, "--out", run.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["metrics.csv", "checkpoint.json", "eval_report.json", "metadata.json", "manifest.json"] {
        assert!(run.join(f).exists(), "missing {f}");
    }

    let log = run.join("rollouts_step00002.jsonl");
    let analysis = tmp.path().join("analysis");
    let out = creditlab(
        &["analyze", "--log", log.to_str().unwrap(), "--out", analysis.to_str().unwrap()],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(analysis.join("quadrant_shares.csv").exists());

    // The last metrics row and the offline analysis of the same dump agree.
    let metrics = fs::read_to_string(run.join("metrics.csv")).unwrap();
    let header: Vec<&str> = metrics.lines().next().unwrap().split(',').collect();
    let last: Vec<&str> = metrics.lines().last().unwrap().split(',').collect();
    let col = |name: &str| last[header.iter().position(|h| *h == name).unwrap()].parse::<f64>().unwrap();
    let groups = parse_rollout_log(&fs::read_to_string(&log).unwrap()).unwrap();
    let bundle = analyze(&groups, AnalyzeOptions::default()).unwrap();
    if col("skipped") == 0.0 {
        for (i, name) in ["share_phr", "share_plr", "share_nlr", "share_nhr"].iter().enumerate() {
            assert!((bundle.quadrant_shares[i] - col(name)).abs() < 1e-9, "{name}");
        }
    }

    let report = tmp.path().join("report");
    let out = creditlab(&["report", "--in", run.to_str().unwrap(), "--out", report.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(report.join("metrics/solve_rate.svg").exists());
    assert!(report.join("eval/pass_at_k.svg").exists());

    let eval = tmp.path().join("eval");
    let out = creditlab(
        &[
            "eval",
            "--checkpoint",
            run.join("checkpoint.json").to_str().unwrap(),
            "--tasks",
            run.join("eval_tasks.json").to_str().unwrap(),
            "--n",
            "8",
            "--k",
            "1,4,8",
            "--out",
            eval.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(eval.join("eval.csv").exists());
}

#[test]
fn seed_override_and_out_root_env() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let root = tmp.path().join("root");
    let out = creditlab(&["train", "--config", &cfg, "--seed", "17"], &root);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = root.join("eapo-seed17");
    let config = fs::read_to_string(run.join("config.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&config).unwrap();
    assert_eq!(v["seed"], 17);
}

#[test]
fn unknown_config_key_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"learning_rate": 0.1}"#);
    let out = creditlab(&["train", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
}

#[test]
fn bad_logs_exit_with_their_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let out = creditlab(&["analyze", "--log", empty.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(6));

    let dup = tmp.path().join("dup.jsonl");
    let line = r#"{"query_id":"q","traj":0,"t":0,"entropy":0.5,"reward":1}"#;
    fs::write(&dup, format!("{line}\n{line}\n")).unwrap();
    let out = creditlab(&["analyze", "--log", dup.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(5));

    let bad = tmp.path().join("bad.jsonl");
    fs::write(&bad, "{not json}\n").unwrap();
    let out = creditlab(&["analyze", "--log", bad.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn report_on_empty_directory_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("nothing");
    fs::create_dir(&input).unwrap();
    let out = creditlab(&["report", "--in", input.to_str().unwrap()], tmp.path());
    assert!(!out.status.success());
}
