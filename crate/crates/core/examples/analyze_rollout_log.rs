//! Writes a synthetic rollout log in which failing trajectories carry higher
//! token entropy, then ingests and analyzes it.
//!
//! cargo run --example analyze_rollout_log -- [path]

use std::path::PathBuf;

use creditlab::io::{analyze, ingest_rollout_log, to_jsonl, write_atomic, AnalyzeOptions};
use creditlab::trainer::RolloutLogRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> creditlab::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("creditlab_rollouts.jsonl"));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut records = Vec::new();
    for q in 0..50 {
        for traj in 0..8 {
            let reward = if rng.gen_bool(0.4) { 1 } else { -1 };
            for t in 0..12 {
                let scale = if reward > 0 { 0.8 } else { 1.4 };
                records.push(RolloutLogRecord {
                    query_id: format!("q{q}"),
                    traj,
                    t,
                    entropy: scale * rng.gen::<f64>(),
                    reward,
                    logp_old: None,
                });
            }
        }
    }
    write_atomic(&path, to_jsonl(&records).as_bytes())?;

    let groups = ingest_rollout_log(&path)?;
    let bundle = analyze(&groups, AnalyzeOptions { bins: 16, vocab_size: Some(6), ..AnalyzeOptions::default() })?;
    println!("{} groups, {} tokens from {}", bundle.groups, bundle.tokens, path.display());
    println!(
        "mean entropy: positive {:.4}, negative {:.4}",
        bundle.positive.mean_entropy, bundle.negative.mean_entropy
    );
    println!("quadrant shares (PHR, PLR, NLR, NHR): {:.4?}", bundle.quadrant_shares);
    println!("proxy CMI: {:.5} nats", bundle.proxy_cmi);
    print!("{}", bundle.histogram_csv());
    Ok(())
}
