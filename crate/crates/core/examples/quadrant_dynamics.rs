//! Trains with the loss restricted to one quadrant at a time and compares
//! final entropy, Pass@16 and Avg@16 across seeds.
//!
//! cargo run --release --example quadrant_dynamics -- [seeds] [steps] [lr] [init_scale]

use std::time::Instant;

use creditlab::credit::Quadrant;
use creditlab::evaluation::{evaluate, Decoding};
use creditlab::trainer::{quadrant_isolation_config, run, TrainConfig, QUADRANT_INIT_SCALE};

struct Outcome {
    seed: u64,
    quadrant: Quadrant,
    entropy: f64,
    pass16: f64,
    avg16: f64,
    solve: f64,
}

fn main() -> creditlab::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize| args.get(i).and_then(|s| s.parse::<f64>().ok());
    let seeds = arg(1).map_or(5, |v| v as u64);
    let steps = arg(2).map_or(300, |v| v as usize);
    let lr = arg(3).unwrap_or(TrainConfig::default().lr);
    let init_scale = arg(4).unwrap_or(QUADRANT_INIT_SCALE);
    let started = Instant::now();

    let mut results = Vec::new();
    for seed in 0..seeds {
        for quadrant in Quadrant::ALL {
            let cfg = TrainConfig { total_steps: steps, lr, init_scale, ..quadrant_isolation_config(quadrant, seed) };
            let out = run(&cfg)?;
            let report = evaluate(&out.params, &out.tasks.eval, 32, &[16], Decoding::default(), seed)?;
            let p = report.at(16).expect("k=16 requested");
            let last = out.metrics.last();
            results.push(Outcome {
                seed,
                quadrant,
                entropy: last.map_or(f64::NAN, |m| m.mean_entropy),
                pass16: p.pass_at_k,
                avg16: p.avg_at_k,
                solve: last.map_or(f64::NAN, |m| m.solve_rate),
            });
        }
    }

    println!("seed quadrant entropy pass@16 avg@16 train_solve");
    for r in &results {
        println!(
            "{:>4} {:>8} {:>7.4} {:>7.4} {:>6.4} {:>6.4}",
            r.seed, r.quadrant, r.entropy, r.pass16, r.avg16, r.solve
        );
    }
    let get = |s: u64, q: Quadrant| results.iter().find(|r| r.seed == s && r.quadrant == q).expect("ran");
    let mut wins = [0; 3];
    for s in 0..seeds {
        let (phr, plr) = (get(s, Quadrant::Phr), get(s, Quadrant::Plr));
        let (nlr, nhr) = (get(s, Quadrant::Nlr), get(s, Quadrant::Nhr));
        wins[0] += usize::from(plr.entropy < phr.entropy);
        wins[1] += usize::from(phr.pass16 >= plr.pass16);
        wins[2] += usize::from(nhr.avg16 >= nlr.avg16);
    }
    println!("PLR entropy below PHR: {}/{seeds}", wins[0]);
    println!("PHR Pass@16 >= PLR:    {}/{seeds}", wins[1]);
    println!("NHR Avg@16 >= NLR:     {}/{seeds}", wins[2]);
    println!("elapsed {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}
