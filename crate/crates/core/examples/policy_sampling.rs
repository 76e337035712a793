//! Softmax with temperature, nucleus truncation and seeded sampling.
//!
//! cargo run --example policy_sampling

use creditlab::policy::{PolicyParams, TokenDistribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> creditlab::Result<()> {
    let params = PolicyParams::from_rows(&[vec![2.0, 1.0, 0.5, -1.0]])?;
    for temp in [0.5, 1.0, 2.0] {
        let d = params.distribution(0, temp)?;
        println!("temperature {temp}: probs {:.4?} entropy {:.4} nats", d.probs(), d.entropy());
    }

    let d = TokenDistribution::new(vec![0.5, 0.3, 0.15, 0.05])?;
    println!("nucleus(0.95) = {:?}", d.nucleus(0.95));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut counts = [0usize; 4];
    for _ in 0..10_000 {
        counts[d.sample(0.95, &mut rng)] += 1;
    }
    println!("10k draws with top_p 0.95: {counts:?}");

    let snap = params.snapshot();
    println!("log pi(0|s0) = {:.6}", snap.log_prob(0, 0, 1.0)?);
    println!("checkpoint: {}", params.to_json().replace('\n', " "));
    Ok(())
}
