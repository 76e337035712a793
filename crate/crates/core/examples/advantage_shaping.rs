//! Group advantages, entropy-normalised credit, and shaped advantages for
//! one hand-written group, with each token's quadrant.
//!
//! cargo run --example advantage_shaping

use creditlab::credit::{credit_score, entropy_stats, group_advantage, quadrant_label, shape_advantage};

fn main() -> creditlab::Result<()> {
    let rewards = [1i8, -1, -1, 1];
    let entropies = [
        vec![1.2, 0.1, 0.9],
        vec![0.2, 0.3, 1.5],
        vec![0.4, 1.1, 0.05],
        vec![0.8, 0.02, 0.6],
    ];
    let adv = group_advantage(&rewards)?;
    let all: Vec<f64> = entropies.iter().flatten().copied().collect();
    let stats = entropy_stats(&all)?;
    println!("group advantages {:?}", adv.advantages);
    println!("entropy mean {:.4}, std {:.4}", stats.mu, stats.sigma);
    println!("traj t  H      base    credit  shaped(a=0.2) quadrant");
    for (i, hs) in entropies.iter().enumerate() {
        for (t, &h) in hs.iter().enumerate() {
            let base = adv.advantages[i];
            let credit = credit_score(h, stats, base, 2.0);
            println!(
                "{i:>4} {t} {h:>5.2} {base:>7.3} {credit:>7.3} {:>13.3} {}",
                shape_advantage(base, credit, 0.2),
                quadrant_label(h, stats.mu, rewards[i])
            );
        }
    }
    Ok(())
}
