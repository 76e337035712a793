//! Analytic logit gradients of the clipped surrogate against central
//! finite differences, and the simplified single-token gradient.
//!
//! cargo run --release --example gradient_check

use creditlab::credit::{Quadrant, QuadrantSet};
use creditlab::objective::{
    analytic_gradients, fd_check, simplified_gradient, Batch, BatchToken, ClipConfig, ObjectiveConfig,
};
use creditlab::policy::PolicyParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> creditlab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = PolicyParams::random_normal(12, 6, 1.0, &mut rng)?;
    let old = PolicyParams::random_normal(12, 6, 1.0, &mut rng)?;
    let tokens: Vec<BatchToken> = (0..64)
        .map(|_| {
            let state = rng.gen_range(0..12);
            let token = rng.gen_range(0..6);
            BatchToken {
                state,
                token,
                logp_old: old.log_prob(state, token, 1.0).expect("valid state"),
                advantage: rng.gen_range(-1.5..1.5),
                quadrant: Quadrant::ALL[rng.gen_range(0..4)],
                mask: true,
            }
        })
        .collect();
    let batch = Batch::new(tokens);
    let cfg = ObjectiveConfig { clip: ClipConfig::default(), temperature: 1.0, entropy_bonus: 0.0 };
    let report = fd_check(&params, &batch, &cfg, 1e-5, 200, 11)?;
    println!(
        "finite differences: max rel error {:.2e} over {} coords ({} excluded at clip boundaries)",
        report.max_rel_error, report.checked, report.excluded.len()
    );

    // At ratio 1 the surrogate gradient reduces to A(onehot - pi) on the row.
    let p = PolicyParams::from_rows(&[vec![0.7f64.ln(), 0.2f64.ln(), 0.1f64.ln()]])?;
    let one = Batch::new(vec![BatchToken {
        state: 0,
        token: 0,
        logp_old: p.log_prob(0, 0, 1.0)?,
        advantage: 1.0,
        quadrant: Quadrant::Phr,
        mask: true,
    }]);
    let g = analytic_gradients(&p, &one, &cfg, QuadrantSet::ALL)?;
    let descent: Vec<f64> = g.row(0).iter().map(|x| -x).collect();
    println!("analytic descent direction   {descent:.6?}");
    println!("simplified descent direction {:.6?}", simplified_gradient(&p.distribution(0, 1.0)?, 0, 1.0));
    Ok(())
}
