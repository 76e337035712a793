//! Token/reward information against the token-entropy ceiling, and the
//! hindsight-posterior form of the same quantity.
//!
//! cargo run --example cmi_bound

use creditlab::infotheory::{cmi_direct, credit_bound_holds, hindsight_cmi, hindsight_posteriors, DiscreteJoint};
use creditlab::policy::TokenDistribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> creditlab::Result<()> {
    // A confident token carries little information about the outcome.
    let confident = TokenDistribution::new(vec![0.97, 0.01, 0.01, 0.01])?;
    let forking = TokenDistribution::uniform(4);
    let likelihood = [[0.9, 0.1], [0.05, 0.95], [0.05, 0.95], [0.05, 0.95]];
    for (name, prior) in [("confident", &confident), ("forking", &forking)] {
        let joint = DiscreteJoint::from_prior_likelihood(prior, &likelihood)?;
        let bound = credit_bound_holds(&joint);
        println!(
            "{name:>9}: H(A) = {:.4}  I(A;R) = {:.4}  hindsight = {:.4}  slack = {:.4}",
            bound.entropy,
            bound.information,
            hindsight_cmi(prior, &likelihood)?,
            bound.slack
        );
    }

    let [pos, neg] = hindsight_posteriors(&forking, &likelihood)?;
    for (label, post) in [("success", pos), ("failure", neg)] {
        if let Some((p_r, posterior)) = post {
            println!("P({label}) = {p_r:.4}, hindsight posterior {posterior:.4?}");
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut violations = 0;
    let mut max_gap: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.gen_range(2..=8);
        let raw: Vec<[f64; 2]> = (0..k).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
        let total: f64 = raw.iter().map(|r| r[0] + r[1]).sum();
        let joint = DiscreteJoint::new(raw.iter().map(|r| [r[0] / total, r[1] / total]).collect())?;
        if !credit_bound_holds(&joint).holds {
            violations += 1;
        }
        max_gap = max_gap.max(cmi_direct(&joint) - joint.token_entropy());
    }
    println!("1000 random joints: {violations} violations, max I - H = {max_gap:.4}");
    Ok(())
}
