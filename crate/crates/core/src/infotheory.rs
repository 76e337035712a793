//! Exact discrete information measures for the token/reward pair.
//!
//! All quantities are in nats and use `0 ln 0 = 0`. Column 0 of a joint is
//! the positive reward, column 1 the negative reward.

use crate::error::{LabError, Result};
use crate::policy::{shannon_entropy, TokenDistribution};

/// Exact joint `p(token, reward)` over a binary reward.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    p: Vec<[f64; 2]>,
}

impl DiscreteJoint {
    pub fn new(p: Vec<[f64; 2]>) -> Result<Self> {
        if p.is_empty() {
            return Err(LabError::Distribution("joint has no token rows".into()));
        }
        if p.iter().flatten().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(LabError::Distribution("joint has a negative or non-finite entry".into()));
        }
        let total: f64 = p.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(LabError::Distribution(format!("joint sums to {total}")));
        }
        Ok(Self { p })
    }

    /// Joint induced by a prior over tokens and `likelihood[a] = [p(+|a), p(-|a)]`.
    pub fn from_prior_likelihood(prior: &TokenDistribution, likelihood: &[[f64; 2]]) -> Result<Self> {
        check_likelihood(prior, likelihood)?;
        let p = prior
            .probs()
            .iter()
            .zip(likelihood)
            .map(|(&pa, l)| [pa * l[0], pa * l[1]])
            .collect();
        // Rounding can push the total a hair away from one; renormalise once.
        let mut joint = Self { p };
        let total: f64 = joint.p.iter().flatten().sum();
        for row in &mut joint.p {
            row[0] /= total;
            row[1] /= total;
        }
        Ok(joint)
    }

    pub fn rows(&self) -> &[[f64; 2]] {
        &self.p
    }

    pub fn token_marginal(&self) -> Vec<f64> {
        self.p.iter().map(|r| r[0] + r[1]).collect()
    }

    pub fn reward_marginal(&self) -> [f64; 2] {
        self.p.iter().fold([0.0, 0.0], |acc, r| [acc[0] + r[0], acc[1] + r[1]])
    }

    /// `H(A)`.
    pub fn token_entropy(&self) -> f64 {
        shannon_entropy(&self.token_marginal())
    }

    /// `H(R)`.
    pub fn reward_entropy(&self) -> f64 {
        shannon_entropy(&self.reward_marginal())
    }

    /// `H(A | R) = sum_r p(r) H(A | R = r)`.
    pub fn conditional_token_entropy(&self) -> f64 {
        let pr = self.reward_marginal();
        (0..2)
            .filter(|&r| pr[r] > 0.0)
            .map(|r| {
                let cond: Vec<f64> = self.p.iter().map(|row| row[r] / pr[r]).collect();
                pr[r] * shannon_entropy(&cond)
            })
            .sum()
    }
}

fn check_likelihood(prior: &TokenDistribution, likelihood: &[[f64; 2]]) -> Result<()> {
    if likelihood.len() != prior.len() {
        return Err(LabError::Shape(format!(
            "likelihood has {} rows, prior has {} tokens",
            likelihood.len(),
            prior.len()
        )));
    }
    for (a, row) in likelihood.iter().enumerate() {
        if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (row[0] + row[1] - 1.0).abs() > 1e-12 {
            return Err(LabError::Distribution(format!(
                "likelihood row {a} is not a distribution over rewards"
            )));
        }
    }
    Ok(())
}

/// `I(A; R) = H(A) - H(A | R)`.
pub fn cmi_direct(joint: &DiscreteJoint) -> f64 {
    joint.token_entropy() - joint.conditional_token_entropy()
}

/// Outcome of checking `I(A; R) <= H(A)` on one joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CreditBound {
    pub holds: bool,
    pub information: f64,
    pub entropy: f64,
    /// `H(A | R)`, the gap between the ceiling and the information.
    pub slack: f64,
}

pub fn credit_bound_holds(joint: &DiscreteJoint) -> CreditBound {
    let entropy = joint.token_entropy();
    let slack = joint.conditional_token_entropy();
    let information = entropy - slack;
    CreditBound {
        holds: information <= entropy + 1e-9 && slack >= -1e-12,
        information,
        entropy,
        slack,
    }
}

/// Bayes posterior over tokens given each reward outcome. `None` for an
/// outcome with zero marginal probability.
pub fn hindsight_posteriors(
    prior: &TokenDistribution,
    likelihood: &[[f64; 2]],
) -> Result<[Option<(f64, Vec<f64>)>; 2]> {
    check_likelihood(prior, likelihood)?;
    let mut out: [Option<(f64, Vec<f64>)>; 2] = [None, None];
    for (r, slot) in out.iter_mut().enumerate() {
        let unnorm: Vec<f64> = prior
            .probs()
            .iter()
            .zip(likelihood)
            .map(|(&pa, l)| pa * l[r])
            .collect();
        let evidence: f64 = unnorm.iter().sum();
        if evidence > 0.0 {
            *slot = Some((evidence, unnorm.iter().map(|u| u / evidence).collect()));
        }
    }
    Ok(out)
}

/// `KL(p || q)` in nats, skipping `p = 0` terms.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum()
}

/// Expected KL between the hindsight posterior and the prior,
/// `sum_r p(r) KL(pi_hs(. | r) || pi)`.
pub fn hindsight_cmi(prior: &TokenDistribution, likelihood: &[[f64; 2]]) -> Result<f64> {
    let posteriors = hindsight_posteriors(prior, likelihood)?;
    Ok(posteriors
        .iter()
        .flatten()
        .map(|(evidence, post)| evidence * kl_divergence(post, prior.probs()))
        .sum())
}

fn bin_index(value: f64, n_bins: usize, range_max: f64) -> usize {
    let width = range_max / n_bins as f64;
    let idx = (value.max(0.0) / width).floor();
    (idx as usize).min(n_bins - 1)
}

fn check_bins(n_bins: usize, range_max: f64) -> Result<()> {
    if n_bins < 2 {
        return Err(LabError::Config(format!("need at least 2 bins, got {n_bins}")));
    }
    if !(range_max > 0.0) || !range_max.is_finite() {
        return Err(LabError::Config(format!("entropy range must be positive, got {range_max}")));
    }
    Ok(())
}

/// Plug-in mutual information between binned token entropies and reward
/// polarity, `H(bin) - H(bin | r)`.
///
/// Bins are equal-width over `[0, range_max]`; values outside are clamped to
/// the end bins. Returns 0 when either polarity is absent.
pub fn proxy_cmi(entropies: &[f64], rewards: &[i8], n_bins: usize, range_max: f64) -> Result<f64> {
    if entropies.len() != rewards.len() {
        return Err(LabError::Shape(format!(
            "{} entropies but {} rewards",
            entropies.len(),
            rewards.len()
        )));
    }
    if entropies.is_empty() {
        return Err(LabError::EmptyInput("no tokens for proxy CMI".into()));
    }
    check_bins(n_bins, range_max)?;
    let mut counts = vec![[0u64; 2]; n_bins];
    for (&h, &r) in entropies.iter().zip(rewards) {
        counts[bin_index(h, n_bins, range_max)][usize::from(r < 0)] += 1;
    }
    let joint: Vec<[f64; 2]> = {
        let n = entropies.len() as f64;
        counts.iter().map(|c| [c[0] as f64 / n, c[1] as f64 / n]).collect()
    };
    let pr = joint.iter().fold([0.0, 0.0], |a, r| [a[0] + r[0], a[1] + r[1]]);
    if pr[0] == 0.0 || pr[1] == 0.0 {
        return Ok(0.0);
    }
    let bins = DiscreteJoint { p: joint };
    Ok(cmi_direct(&bins))
}

/// Entropy counts split by reward polarity.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyHistogram {
    pub bin_edges: Vec<f64>,
    pub counts_pos: Vec<u64>,
    pub counts_neg: Vec<u64>,
    pub mean_entropy: f64,
    /// Share of all tokens strictly above `mean_entropy`.
    pub frac_above_mean: f64,
}

impl EntropyHistogram {
    pub fn total_pos(&self) -> u64 {
        self.counts_pos.iter().sum()
    }

    pub fn total_neg(&self) -> u64 {
        self.counts_neg.iter().sum()
    }

    /// Per-polarity frequencies; all zeros for an empty polarity.
    pub fn normalized(&self) -> (Vec<f64>, Vec<f64>) {
        let norm = |c: &[u64]| {
            let t: u64 = c.iter().sum();
            c.iter()
                .map(|&x| if t == 0 { 0.0 } else { x as f64 / t as f64 })
                .collect()
        };
        (norm(&self.counts_pos), norm(&self.counts_neg))
    }

    /// CSV with columns `bin_lo,bin_hi,count_pos,count_neg`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count_pos,count_neg\n");
        for i in 0..self.counts_pos.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.bin_edges[i], self.bin_edges[i + 1], self.counts_pos[i], self.counts_neg[i]
            ));
        }
        out
    }
}

pub fn entropy_histograms(tokens: &[(f64, i8)], n_bins: usize, range_max: f64) -> Result<EntropyHistogram> {
    if tokens.is_empty() {
        return Err(LabError::EmptyInput("no tokens to histogram".into()));
    }
    check_bins(n_bins, range_max)?;
    let width = range_max / n_bins as f64;
    let bin_edges: Vec<f64> = (0..=n_bins)
        .map(|i| if i == n_bins { range_max } else { i as f64 * width })
        .collect();
    let mut counts_pos = vec![0; n_bins];
    let mut counts_neg = vec![0; n_bins];
    for &(h, r) in tokens {
        let b = bin_index(h, n_bins, range_max);
        if r >= 0 {
            counts_pos[b] += 1;
        } else {
            counts_neg[b] += 1;
        }
    }
    let mean_entropy = tokens.iter().map(|t| t.0).sum::<f64>() / tokens.len() as f64;
    let above = tokens.iter().filter(|t| t.0 > mean_entropy).count();
    Ok(EntropyHistogram {
        bin_edges,
        counts_pos,
        counts_neg,
        mean_entropy,
        frac_above_mean: above as f64 / tokens.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand::seq::SliceRandom;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn random_joint(rng: &mut ChaCha8Rng, tokens: usize) -> DiscreteJoint {
        let raw: Vec<[f64; 2]> = (0..tokens).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
        let total: f64 = raw.iter().flatten().sum();
        let p: Vec<[f64; 2]> = raw.iter().map(|r| [r[0] / total, r[1] / total]).collect();
        let s: f64 = p.iter().flatten().sum();
        let mut p = p;
        p[0][0] += 1.0 - s;
        DiscreteJoint::new(p).unwrap()
    }

    #[test]
    fn cmi_examples() {
        let pa = [0.2, 0.5, 0.3];
        let pr = [0.4, 0.6];
        let prod = DiscreteJoint::new(pa.iter().map(|a| [a * pr[0], a * pr[1]]).collect()).unwrap();
        assert!(cmi_direct(&prod).abs() < 1e-15);

        let perfect = DiscreteJoint::new(vec![[0.5, 0.0], [0.0, 0.5]]).unwrap();
        assert!((cmi_direct(&perfect) - LN_2).abs() < 1e-15);
    }

    #[test]
    fn invalid_joint_rejected() {
        assert!(matches!(DiscreteJoint::new(vec![[0.5, 0.6]]), Err(LabError::Distribution(_))));
        assert!(matches!(DiscreteJoint::new(vec![[-0.1, 1.1]]), Err(LabError::Distribution(_))));
        assert!(DiscreteJoint::new(vec![]).is_err());
    }

    #[test]
    fn credit_bound_examples() {
        let one_hot = DiscreteJoint::new(vec![[0.3, 0.7], [0.0, 0.0]]).unwrap();
        let b = credit_bound_holds(&one_hot);
        assert!(b.holds);
        assert_eq!((b.information.abs() < 1e-15, b.entropy, b.slack), (true, 0.0, 0.0));

        let perfect = DiscreteJoint::new(vec![[0.5, 0.0], [0.0, 0.5]]).unwrap();
        let b = credit_bound_holds(&perfect);
        assert!(b.holds);
        assert_eq!(b.slack, 0.0);
        assert!((b.information - b.entropy).abs() < 1e-15);
    }

    #[test]
    fn hindsight_examples() {
        let prior = TokenDistribution::new(vec![0.1, 0.6, 0.3]).unwrap();
        let flat = vec![[0.25, 0.75]; 3];
        assert!(hindsight_cmi(&prior, &flat).unwrap().abs() < 1e-15);

        let prior = TokenDistribution::uniform(2);
        let sharp = [[1.0, 0.0], [0.0, 1.0]];
        assert!((hindsight_cmi(&prior, &sharp).unwrap() - LN_2).abs() < 1e-15);
    }

    #[test]
    fn hindsight_skips_impossible_outcome() {
        let prior = TokenDistribution::new(vec![0.4, 0.6]).unwrap();
        let always_win = [[1.0, 0.0], [1.0, 0.0]];
        let post = hindsight_posteriors(&prior, &always_win).unwrap();
        assert!(post[1].is_none());
        assert_eq!(hindsight_cmi(&prior, &always_win).unwrap(), 0.0);
    }

    #[test]
    fn random_joints_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let n = rng.gen_range(2..=8);
            let j = random_joint(&mut rng, n);
            let i = cmi_direct(&j);
            assert!(i >= -1e-12);
            assert!(i <= j.token_entropy().min(j.reward_entropy()) + 1e-9);
            assert!(credit_bound_holds(&j).holds);
        }
    }

    #[test]
    fn hindsight_matches_direct_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let n = rng.gen_range(2..=8);
            let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            let mut probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let s: f64 = probs.iter().sum();
            probs[0] += 1.0 - s;
            let prior = TokenDistribution::new(probs).unwrap();
            let like: Vec<[f64; 2]> = (0..n)
                .map(|_| {
                    let q = rng.gen::<f64>();
                    [q, 1.0 - q]
                })
                .collect();
            let joint = DiscreteJoint::from_prior_likelihood(&prior, &like).unwrap();
            let direct = cmi_direct(&joint);
            let hs = hindsight_cmi(&prior, &like).unwrap();
            assert!((direct - hs).abs() < 1e-12, "{direct} vs {hs}");
        }
    }

    #[test]
    fn proxy_examples() {
        let range = 4f64.ln();
        let ents = [0.1, 0.4, 0.9, 1.2, 0.1, 0.4, 0.9, 1.2];
        let rews = [1, 1, 1, 1, -1, -1, -1, -1];
        assert!(proxy_cmi(&ents, &rews, 4, range).unwrap().abs() < 1e-15);

        let ents = [0.1, 0.2, 0.3, 0.4, 1.1, 1.2, 1.3, 1.35];
        let rews = [1, 1, 1, 1, -1, -1, -1, -1];
        assert!((proxy_cmi(&ents, &rews, 2, range).unwrap() - LN_2).abs() < 1e-15);

        assert_eq!(proxy_cmi(&[0.1, 0.9], &[1, 1], 4, range).unwrap(), 0.0);
        assert!(matches!(proxy_cmi(&[0.1], &[1, 1], 4, range), Err(LabError::Shape(_))));
    }

    #[test]
    fn proxy_permutation_null_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let range = 6f64.ln();
        let ents: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>() * range).collect();
        let mut rews: Vec<i8> = (0..10_000).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        rews.shuffle(&mut rng);
        let i = proxy_cmi(&ents, &rews, 32, range).unwrap();
        assert!(i.abs() <= 0.02, "{i}");
    }

    #[test]
    fn proxy_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let range = 6f64.ln();
        let ents: Vec<f64> = (0..500).map(|_| rng.gen::<f64>() * range).collect();
        let rews: Vec<i8> = (0..500).map(|_| if rng.gen() { 1 } else { -1 }).collect();
        let base = proxy_cmi(&ents, &rews, 32, range).unwrap();
        let mut idx: Vec<usize> = (0..500).collect();
        idx.shuffle(&mut rng);
        let e2: Vec<f64> = idx.iter().map(|&i| ents[i]).collect();
        let r2: Vec<i8> = idx.iter().map(|&i| rews[i]).collect();
        assert!((proxy_cmi(&e2, &r2, 32, range).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn histogram_examples() {
        let h = entropy_histograms(&[(0.5, 1)], 4, 4f64.ln()).unwrap();
        assert_eq!(h.counts_pos, vec![0, 1, 0, 0]);
        assert_eq!(h.counts_neg, vec![0; 4]);
        assert_eq!(h.bin_edges.len(), 5);
        assert!(h.bin_edges.windows(2).all(|w| w[0] < w[1]));

        let toks = [(0.1, 1), (0.7, -1), (1.3, -1), (0.2, 1), (2.0, 1)];
        let h = entropy_histograms(&toks, 3, 4f64.ln()).unwrap();
        assert_eq!(h.total_pos(), 3);
        assert_eq!(h.total_neg(), 2);
        assert!((h.frac_above_mean - 0.4).abs() < 1e-15);
        assert!(matches!(entropy_histograms(&[], 3, 1.0), Err(LabError::EmptyInput(_))));
    }

    #[test]
    fn histogram_csv_layout() {
        let h = entropy_histograms(&[(0.5, 1), (1.0, -1)], 2, 2.0).unwrap();
        assert_eq!(h.to_csv(), "bin_lo,bin_hi,count_pos,count_neg\n0,1,1,0\n1,2,0,1\n");
    }
}
