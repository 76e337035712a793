//! Generates a ForkArith family and prints its exhaustive solution table:
//! random-policy success, decision forks, and per-token completion counts.
//!
//! cargo run --release --example fork_arith_oracle -- [seed]

use creditlab::env::{enumerate_solutions, generate_family, EpisodeState, FamilyConfig, Task};

fn main() -> creditlab::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let family = generate_family(&FamilyConfig::default(), seed)?;
    println!("{} training instances", family.train.len());
    let Task::ForkArith(first) = &family.train[0] else { unreachable!("family tasks are ForkArith") };
    println!(
        "target {} mod {}, horizon {}, ops {:?}",
        first.target,
        first.modulus,
        first.horizon,
        first.ops.iter().map(|o| o.label()).collect::<Vec<_>>()
    );

    for task in &family.train {
        let Task::ForkArith(t) = task else { continue };
        let table = enumerate_solutions(task)?;
        println!("start {:>2}: success fraction {:.4}", t.start, table.success_fraction());
    }

    let task = &family.train[0];
    let table = enumerate_solutions(task)?;
    let s0 = task.state_id(task.reset());
    println!("completions from the first state, per token:");
    for a in 0..task.vocab_size() {
        println!("  token {a}: {} of {} continuations succeed", table.completions(s0, a), table.from_state(s0));
    }
    let forks = table.fork_states();
    let early: Vec<EpisodeState> = forks.iter().take(8).map(|&s| task.decode_state(s)).collect();
    println!("{} fork states, first few: {early:?}", forks.len());
    Ok(())
}
