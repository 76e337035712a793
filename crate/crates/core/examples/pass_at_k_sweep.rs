//! Pass@k and Avg@k of a uniform policy and of a briefly trained one over
//! k = 1, 2, 4, ..., n.
//!
//! cargo run --release --example pass_at_k_sweep -- [n]

use creditlab::evaluation::{evaluate, k_grid, pass_at_k, Decoding};
use creditlab::trainer::{run, TrainConfig};

fn main() -> creditlab::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(256);
    println!("pass@2 with n=4, c=2: {:.6}", pass_at_k(4, 2, 2)?);

    let cfg = TrainConfig { total_steps: 100, exact_cmi: false, ..TrainConfig::default() };
    let out = run(&cfg)?;
    let ks = k_grid(n);
    let before = evaluate(&out.initial_params, &out.tasks.eval, n, &ks, Decoding::default(), 0)?;
    let after = evaluate(&out.params, &out.tasks.eval, n, &ks, Decoding::default(), 0)?;
    println!("{:>5} {:>12} {:>12}", "k", "uniform", "trained");
    for (a, b) in before.curve.iter().zip(&after.curve) {
        println!("{:>5} {:>12.4} {:>12.4}", a.k, a.pass_at_k, b.pass_at_k);
    }
    println!("avg@k: uniform {:.4}, trained {:.4}", before.curve[0].avg_at_k, after.curve[0].avg_at_k);
    Ok(())
}
