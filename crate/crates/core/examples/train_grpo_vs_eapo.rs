//! Trains GRPO and EAPO side by side on one seed and prints the learning
//! curves every 25 steps.
//!
//! cargo run --release --example train_grpo_vs_eapo -- [seed] [steps] [lr] [init_scale]

use creditlab::credit::Mode;
use creditlab::evaluation::{evaluate, Decoding};
use creditlab::trainer::{run, TrainConfig};

fn main() -> creditlab::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize| args.get(i).and_then(|s| s.parse::<f64>().ok());
    let base = TrainConfig {
        seed: arg(1).map_or(0, |s| s as u64),
        total_steps: arg(2).map_or(300, |s| s as usize),
        lr: arg(3).unwrap_or(TrainConfig::default().lr),
        init_scale: arg(4).unwrap_or(0.0),
        ..TrainConfig::default()
    };
    for mode in [Mode::Grpo, Mode::Eapo] {
        let out = run(&TrainConfig { mode, ..base.clone() })?;
        println!("{mode}: step solve_rate entropy proxy_cmi exact_cmi");
        for m in out.metrics.iter().filter(|m| m.step % 25 == 0 || m.step + 1 == base.total_steps) {
            println!(
                "  {:>4} {:.4} {:.4} {:.5} {:.5}",
                m.step, m.solve_rate, m.mean_entropy, m.proxy_cmi, m.exact_cmi
            );
        }
        let r = evaluate(&out.params, &out.tasks.eval, 32, &[1, 16], Decoding::default(), base.seed)?;
        println!("  eval Avg@16 {:.4} Pass@16 {:.4}", r.curve[0].avg_at_k, r.curve[1].pass_at_k);
    }
    Ok(())
}
