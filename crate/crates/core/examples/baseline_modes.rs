//! Compares the shaping variants on one seed: final solve rate, entropy and
//! evaluation accuracy.
//!
//! cargo run --release --example baseline_modes -- [seed] [steps]

use creditlab::credit::Mode;
use creditlab::evaluation::{evaluate, Decoding};
use creditlab::trainer::{run, TrainConfig};

fn main() -> creditlab::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seed = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let steps = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(150);
    println!("{:<9} {:>7} {:>8} {:>7} {:>8}", "mode", "solve", "entropy", "avg@16", "pass@16");
    for mode in ["grpo", "eapo", "wreinf", "forking", "entroadv", "entroreg", "phr+nhr"] {
        let mode: Mode = mode.parse()?;
        let cfg = TrainConfig { mode, seed, total_steps: steps, exact_cmi: false, ..TrainConfig::default() };
        let out = run(&cfg)?;
        let last = out.metrics.last().expect("steps > 0");
        let r = evaluate(&out.params, &out.tasks.eval, 32, &[16], Decoding::default(), seed)?;
        println!(
            "{:<9} {:>7.4} {:>8.4} {:>7.4} {:>8.4}",
            mode.to_string(),
            last.solve_rate,
            last.mean_entropy,
            r.curve[0].avg_at_k,
            r.curve[0].pass_at_k
        );
    }
    Ok(())
}
