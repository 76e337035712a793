//! JSONL rollout logs: one token per line.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::credit::{entropy_stats, EntropyStats};
use crate::error::{LabError, Result};
use crate::trainer::RolloutLogRecord;

/// Records sharing one `query_id`, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct LogGroup {
    pub query_id: String,
    pub records: Vec<RolloutLogRecord>,
    pub stats: EntropyStats,
}

impl LogGroup {
    /// Reward of each trajectory, indexed by position in ascending `traj` order.
    pub fn trajectory_rewards(&self) -> Vec<(usize, i8)> {
        let mut seen: Vec<(usize, i8)> = Vec::new();
        for r in &self.records {
            if !seen.iter().any(|&(t, _)| t == r.traj) {
                seen.push((r.traj, r.reward));
            }
        }
        seen.sort_by_key(|&(t, _)| t);
        seen
    }
}

/// Parses and groups a JSONL rollout log held in memory.
pub fn parse_rollout_log(text: &str) -> Result<Vec<LogGroup>> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<RolloutLogRecord>> = HashMap::new();
    let mut keys: HashSet<(String, usize, usize)> = HashSet::new();
    let mut traj_reward: HashMap<(String, usize), i8> = HashMap::new();

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RolloutLogRecord = serde_json::from_str(line)
            .map_err(|e| LabError::Parse { line: line_no, message: e.to_string() })?;
        if !(rec.entropy >= 0.0) || !rec.entropy.is_finite() {
            return Err(LabError::Parse { line: line_no, message: format!("entropy {} is not a finite non-negative value", rec.entropy) });
        }
        if rec.reward != 1 && rec.reward != -1 {
            return Err(LabError::Parse { line: line_no, message: format!("reward {} is not +1 or -1", rec.reward) });
        }
        if let Some(lp) = rec.logp_old {
            if !(lp <= 0.0) {
                return Err(LabError::Parse { line: line_no, message: format!("logp_old {lp} is not a log-probability") });
            }
        }
        if !keys.insert((rec.query_id.clone(), rec.traj, rec.t)) {
            return Err(LabError::DuplicateRecord { query_id: rec.query_id, traj: rec.traj, t: rec.t, line: line_no });
        }
        match traj_reward.insert((rec.query_id.clone(), rec.traj), rec.reward) {
            Some(prev) if prev != rec.reward => {
                return Err(LabError::Parse {
                    line: line_no,
                    message: format!("trajectory {} of {} has mixed rewards", rec.traj, rec.query_id),
                })
            }
            _ => {}
        }
        if !groups.contains_key(&rec.query_id) {
            order.push(rec.query_id.clone());
        }
        groups.entry(rec.query_id.clone()).or_default().push(rec);
    }
    if order.is_empty() {
        return Err(LabError::EmptyInput("rollout log has no records".into()));
    }
    order
        .into_iter()
        .map(|q| {
            let records = groups.remove(&q).expect("every ordered id has records");
            let entropies: Vec<f64> = records.iter().map(|r| r.entropy).collect();
            Ok(LogGroup { query_id: q, stats: entropy_stats(&entropies)?, records })
        })
        .collect()
}

pub fn ingest_rollout_log(path: &Path) -> Result<Vec<LogGroup>> {
    parse_rollout_log(&super::read_text(path)?)
}
