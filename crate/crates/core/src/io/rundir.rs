//! Run directories for training and evaluation.
//!
//! A training run directory holds:
//!
//! | file | content |
//! |---|---|
//! | `config.json` | resolved run config |
//! | `metadata.json` | version, normaliser choice, baseline, skipped steps |
//! | `train_tasks.json`, `eval_tasks.json` | generated task instances |
//! | `metrics.csv` | one row per step |
//! | `timing.csv` | wall time per step |
//! | `checkpoint.json` | final parameters |
//! | `checkpoint_stepNNNNN.json` | intermediate parameters |
//! | `shaped_stepNNNNN.jsonl`, `rollouts_stepNNNNN.jsonl` | token dumps |
//! | `eval_report.json`, `eval.csv` | post-training evaluation |
//! | `manifest.json` | every file above with its SHA-256 |

use std::path::Path;

use serde::Serialize;

use crate::env::{tasks_from_json, tasks_to_json, Task};
use crate::error::{LabError, Result};
use crate::evaluation::{evaluate_named, k_grid, Decoding, EvalReport};
use crate::policy::PolicyParams;
use crate::trainer::{random_policy_baseline, run_with, MetricsRow, RunOutput};

use super::config::RunConfigFile;
use super::{read_text, to_jsonl, ManifestEntry, OutputDir};

#[derive(Debug, Clone, Serialize)]
struct Metadata<'a> {
    library: &'static str,
    version: &'static str,
    git_hash: Option<String>,
    normalizer: &'static str,
    mini_batch_unit: &'static str,
    random_policy_success: f64,
    steps: usize,
    skipped_steps: usize,
    final_solve_rate: Option<f64>,
    config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    eval: Option<&'a EvalReport>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output: RunOutput,
    pub eval: Option<EvalReport>,
    pub manifest: Vec<ManifestEntry>,
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = MetricsRow::csv_header();
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

fn timing_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from("step,wall_time\n");
    for r in rows {
        out.push_str(&format!("{},{}\n", r.step, r.wall_time));
    }
    out
}

/// Trains according to `cfg` and writes the run directory.
pub fn train_to_dir(cfg: &RunConfigFile, dir: &Path) -> Result<RunSummary> {
    let mut out = OutputDir::create(dir)?;
    out.write("config.json", cfg.to_json().as_bytes())?;
    let dump = cfg.run.dump_interval;
    let ckpt = cfg.run.checkpoint_interval;
    let last = cfg.train.total_steps.saturating_sub(1);
    let mut wrote_tasks = false;

    let output = run_with(&cfg.train, |trainer, step| {
        if !wrote_tasks {
            out.write("train_tasks.json", tasks_to_json(&trainer.tasks.train).as_bytes())?;
            out.write("eval_tasks.json", tasks_to_json(&trainer.tasks.eval).as_bytes())?;
            wrote_tasks = true;
        }
        let s = step.metrics.step;
        if dump > 0 && (s % dump == 0 || s == last) {
            out.write(&format!("shaped_step{s:05}.jsonl"), to_jsonl(&step.shaped).as_bytes())?;
            out.write(&format!("rollouts_step{s:05}.jsonl"), to_jsonl(&step.rollout_log).as_bytes())?;
        }
        if ckpt > 0 && (s + 1) % ckpt == 0 {
            out.write(&format!("checkpoint_step{:05}.json", s + 1), trainer.params.to_json().as_bytes())?;
        }
        Ok(())
    })?;
    if !wrote_tasks {
        out.write("train_tasks.json", tasks_to_json(&output.tasks.train).as_bytes())?;
        out.write("eval_tasks.json", tasks_to_json(&output.tasks.eval).as_bytes())?;
    }

    out.write("metrics.csv", metrics_csv(&output.metrics).as_bytes())?;
    out.write("timing.csv", timing_csv(&output.metrics).as_bytes())?;
    out.write("checkpoint.json", output.params.to_json().as_bytes())?;

    let eval = if cfg.run.eval_n > 0 {
        let report = evaluate_named(
            "eval",
            &output.params,
            &output.tasks.eval,
            cfg.run.eval_n,
            &k_grid(cfg.run.eval_n),
            cfg.run.eval_decoding,
            cfg.train.seed,
        )?;
        out.write("eval_report.json", report.to_json().as_bytes())?;
        out.write("eval.csv", report.to_csv().as_bytes())?;
        Some(report)
    } else {
        None
    };

    let meta = Metadata {
        library: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        git_hash: std::env::var("CREDITLAB_GIT_HASH").ok(),
        normalizer: "per_mini_batch_token_count",
        mini_batch_unit: "trajectories",
        random_policy_success: random_policy_baseline(&output.tasks.train)?,
        steps: output.metrics.len(),
        skipped_steps: output.skipped_steps,
        final_solve_rate: output.metrics.last().map(|m| m.solve_rate),
        config: serde_json::from_str(&cfg.to_json()).expect("resolved config is JSON"),
        eval: eval.as_ref(),
    };
    out.write("metadata.json", serde_json::to_string_pretty(&meta).expect("metadata serialises").as_bytes())?;
    let manifest = out.finish()?;
    Ok(RunSummary { output, eval, manifest })
}

/// Evaluates a checkpoint on a task file and writes `eval_report.json`,
/// `eval.csv` and a manifest.
pub fn eval_to_dir(
    checkpoint: &Path,
    tasks: &Path,
    n: usize,
    ks: &[usize],
    decoding: Decoding,
    seed: u64,
    dir: &Path,
) -> Result<EvalReport> {
    let params = PolicyParams::load(checkpoint)?;
    let tasks: Vec<Task> = tasks_from_json(&read_text(tasks)?)?;
    for t in &tasks {
        if t.state_count() != params.state_count() || t.vocab_size() != params.vocab_size() {
            return Err(LabError::Shape(format!(
                "checkpoint is {}x{} but task needs {}x{}",
                params.state_count(),
                params.vocab_size(),
                t.state_count(),
                t.vocab_size()
            )));
        }
    }
    let name = tasks_label(tasks.len());
    let report = evaluate_named(&name, &params, &tasks, n, ks, decoding, seed)?;
    let mut out = OutputDir::create(dir)?;
    out.write("eval_report.json", report.to_json().as_bytes())?;
    out.write("eval.csv", report.to_csv().as_bytes())?;
    out.finish()?;
    Ok(report)
}

fn tasks_label(n: usize) -> String {
    format!("tasks{n}")
}
