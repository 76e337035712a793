//! Group-relative advantages and entropy-aware credit shaping.
//!
//! The pipeline per group is: standardise rewards into advantages, compute
//! the entropy mean and spread over every token of the group, then derive a
//! per-token credit score `clip((H - mu) / sigma, -|A|/phi, |A|/phi)` and the
//! shaped advantage `A + alpha * sign(A) * credit`. The credit score is a
//! constant with respect to the policy parameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Standard deviations below this are treated as zero variance.
pub const ZERO_VARIANCE_STD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quadrant {
    /// Positive reward, entropy at or above the group mean.
    #[serde(rename = "PHR")]
    Phr,
    /// Positive reward, entropy below the group mean.
    #[serde(rename = "PLR")]
    Plr,
    /// Negative reward, entropy below the group mean.
    #[serde(rename = "NLR")]
    Nlr,
    /// Negative reward, entropy at or above the group mean.
    #[serde(rename = "NHR")]
    Nhr,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::Phr, Quadrant::Plr, Quadrant::Nlr, Quadrant::Nhr];

    pub fn index(self) -> usize {
        match self {
            Quadrant::Phr => 0,
            Quadrant::Plr => 1,
            Quadrant::Nlr => 2,
            Quadrant::Nhr => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Quadrant::Phr => "PHR",
            Quadrant::Plr => "PLR",
            Quadrant::Nlr => "NLR",
            Quadrant::Nhr => "NHR",
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Set of quadrants, used to restrict a loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuadrantSet([bool; 4]);

impl QuadrantSet {
    pub const ALL: QuadrantSet = QuadrantSet([true; 4]);
    pub const NONE: QuadrantSet = QuadrantSet([false; 4]);

    pub fn only(q: Quadrant) -> Self {
        let mut s = Self::NONE;
        s.0[q.index()] = true;
        s
    }

    pub fn with(mut self, q: Quadrant) -> Self {
        self.0[q.index()] = true;
        self
    }

    pub fn contains(self, q: Quadrant) -> bool {
        self.0[q.index()]
    }

    pub fn is_all(self) -> bool {
        self == Self::ALL
    }
}

impl fmt::Display for QuadrantSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = Quadrant::ALL
            .iter()
            .filter(|q| self.contains(**q))
            .map(|q| q.name().to_ascii_lowercase())
            .collect();
        f.write_str(&names.join("+"))
    }
}

/// Standardised rewards of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAdvantage {
    pub advantages: Vec<f64>,
}

/// `(r - mean) / std` with the population standard deviation.
pub fn group_advantage(rewards: &[i8]) -> Result<GroupAdvantage> {
    if rewards.len() < 2 {
        return Err(LabError::Config(format!("group needs at least 2 rewards, got {}", rewards.len())));
    }
    let r: Vec<f64> = rewards.iter().map(|&x| f64::from(x)).collect();
    let (mean, std) = population_moments(&r);
    if std < ZERO_VARIANCE_STD {
        return Err(LabError::ZeroVarianceGroup { std });
    }
    Ok(GroupAdvantage {
        advantages: r.iter().map(|x| (x - mean) / std).collect(),
    })
}

fn population_moments(xs: &[f64]) -> (f64, f64) {
    // Rounding can put the mean of identical values beside them.
    if xs.iter().all(|&x| x == xs[0]) {
        return (xs[0], 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Population mean and standard deviation of a group's token entropies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyStats {
    pub mu: f64,
    pub sigma: f64,
}

pub fn entropy_stats(entropies: &[f64]) -> Result<EntropyStats> {
    if entropies.is_empty() {
        return Err(LabError::EmptyInput("no token entropies in group".into()));
    }
    // Sorting first makes the result independent of input order.
    let mut sorted = entropies.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mu, sigma) = population_moments(&sorted);
    Ok(EntropyStats { mu, sigma })
}

/// Entropy-normalised credit, clipped to `|base| / phi`. Zero when the group
/// has no entropy spread.
pub fn credit_score(entropy: f64, stats: EntropyStats, base: f64, phi: f64) -> f64 {
    if stats.sigma == 0.0 {
        return 0.0;
    }
    let bound = base.abs() / phi;
    ((entropy - stats.mu) / stats.sigma).clamp(-bound, bound)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `base + alpha * sign(base) * credit`, with `sign(0) = 0`.
pub fn shape_advantage(base: f64, credit: f64, alpha: f64) -> f64 {
    base + alpha * sign(base) * credit
}

/// Quadrant of one token. Ties on the mean count as high entropy.
pub fn quadrant_label(entropy: f64, mu: f64, reward: i8) -> Quadrant {
    match (entropy >= mu, reward >= 0) {
        (true, true) => Quadrant::Phr,
        (false, true) => Quadrant::Plr,
        (false, false) => Quadrant::Nlr,
        (true, false) => Quadrant::Nhr,
    }
}

/// Per-token shaping result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapedAdvantage {
    pub base: f64,
    pub credit: f64,
    pub shaped: f64,
    pub quadrant: Quadrant,
}

/// Objective variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Grpo,
    Eapo,
    /// Positive-trajectory advantages scaled down.
    WReinf,
    /// Only the highest-entropy tokens of the batch are trained.
    Forking,
    /// Non-negative entropy bonus added to the advantage.
    EntroAdv,
    /// Differentiable entropy bonus in the loss.
    EntroReg,
    /// GRPO restricted to a set of quadrants.
    Quadrants(QuadrantSet),
}

impl Mode {
    pub fn name(&self) -> String {
        match self {
            Mode::Grpo => "grpo".into(),
            Mode::Eapo => "eapo".into(),
            Mode::WReinf => "wreinf".into(),
            Mode::Forking => "forking".into(),
            Mode::EntroAdv => "entroadv".into(),
            Mode::EntroReg => "entroreg".into(),
            Mode::Quadrants(set) => set.to_string(),
        }
    }
}

impl FromStr for Mode {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Ok(match lower.as_str() {
            "grpo" => Mode::Grpo,
            "eapo" => Mode::Eapo,
            "wreinf" => Mode::WReinf,
            "forking" => Mode::Forking,
            "entroadv" => Mode::EntroAdv,
            "entroreg" => Mode::EntroReg,
            _ => {
                let mut set = QuadrantSet::NONE;
                for part in lower.split('+') {
                    let q = match part {
                        "phr" => Quadrant::Phr,
                        "plr" => Quadrant::Plr,
                        "nlr" => Quadrant::Nlr,
                        "nhr" => Quadrant::Nhr,
                        _ => return Err(LabError::Config(format!("unknown mode {s:?}"))),
                    };
                    set = set.with(q);
                }
                Mode::Quadrants(set)
            }
        })
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl Serialize for Mode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for Mode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Coefficients shared by the shaping modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapingParams {
    pub alpha: f64,
    pub phi: f64,
    /// Multiplier on positive-trajectory advantages in W-REINF.
    pub positive_weight: f64,
    /// Fraction of batch tokens kept by Forking.
    pub forking_fraction: f64,
    /// Entropy coefficient in EntroReg.
    pub entropy_coef: f64,
}

impl Default for ShapingParams {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            phi: 2.0,
            positive_weight: 0.1,
            forking_fraction: 0.2,
            entropy_coef: 0.001,
        }
    }
}

/// One token as seen by the shaping step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenCredit {
    /// Index into the per-group entropy statistics.
    pub group: usize,
    pub reward: i8,
    pub base: f64,
    pub entropy: f64,
}

/// Per-token advantage and loss mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapedToken {
    pub advantage: f64,
    pub mask: bool,
    pub shaped: ShapedAdvantage,
}

/// Shaping output for a whole rollout batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Shaping {
    pub tokens: Vec<ShapedToken>,
    /// Coefficient of the differentiable entropy bonus; zero except EntroReg.
    pub entropy_bonus: f64,
}

/// Applies `mode` to every token of a batch. `stats[g]` must hold the entropy
/// statistics of group `g`.
pub fn baseline_shaping(
    mode: Mode,
    tokens: &[TokenCredit],
    stats: &[EntropyStats],
    params: &ShapingParams,
) -> Result<Shaping> {
    if params.phi <= 0.0 || !params.phi.is_finite() {
        return Err(LabError::Config(format!("phi must be positive, got {}", params.phi)));
    }
    let mut out = Vec::with_capacity(tokens.len());
    for tok in tokens {
        let st = *stats.get(tok.group).ok_or_else(|| {
            LabError::Index(format!("token references group {} of {}", tok.group, stats.len()))
        })?;
        let credit = credit_score(tok.entropy, st, tok.base, params.phi);
        let quadrant = quadrant_label(tok.entropy, st.mu, tok.reward);
        let (advantage, mask) = match mode {
            Mode::Grpo | Mode::EntroReg | Mode::Forking => (tok.base, true),
            Mode::Eapo => (shape_advantage(tok.base, credit, params.alpha), true),
            Mode::WReinf => {
                let w = if tok.reward > 0 { params.positive_weight } else { 1.0 };
                (tok.base * w, true)
            }
            Mode::EntroAdv => (tok.base + params.alpha * credit.max(0.0), true),
            Mode::Quadrants(set) => (tok.base, set.contains(quadrant)),
        };
        out.push(ShapedToken {
            advantage,
            mask,
            shaped: ShapedAdvantage {
                base: tok.base,
                credit,
                shaped: advantage,
                quadrant,
            },
        });
    }
    if mode == Mode::Forking {
        let keep = (params.forking_fraction * tokens.len() as f64).ceil() as usize;
        let mut order: Vec<usize> = (0..tokens.len()).collect();
        order.sort_by(|&a, &b| tokens[b].entropy.total_cmp(&tokens[a].entropy).then(a.cmp(&b)));
        for t in &mut out {
            t.mask = false;
        }
        for &i in order.iter().take(keep) {
            out[i].mask = true;
        }
    }
    Ok(Shaping {
        tokens: out,
        entropy_bonus: if mode == Mode::EntroReg { params.entropy_coef } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn identical_entropies_all_count_high() {
        let h = 6f64.ln();
        let st = entropy_stats(&[h; 37]).unwrap();
        assert_eq!((st.mu, st.sigma), (h, 0.0));
        assert_eq!(quadrant_label(h, st.mu, 1), Quadrant::Phr);
        assert_eq!(quadrant_label(h, st.mu, -1), Quadrant::Nhr);
    }

    #[test]
    fn group_advantage_examples() {
        let a = group_advantage(&[1, 1, -1, -1]).unwrap();
        assert_eq!(a.advantages, vec![1.0, 1.0, -1.0, -1.0]);

        // mean -0.5, population std sqrt(3)/2
        let a = group_advantage(&[1, -1, -1, -1]).unwrap();
        let std = 3f64.sqrt() / 2.0;
        let expected = [1.5 / std, -0.5 / std, -0.5 / std, -0.5 / std];
        for (x, e) in a.advantages.iter().zip(expected) {
            assert!(close(*x, e, 1e-15));
        }
        assert!(close(a.advantages[0], 1.732051, 1e-6));
        assert!(close(a.advantages[1], -0.577350, 1e-6));

        assert!(matches!(group_advantage(&[1, 1, 1, 1]), Err(LabError::ZeroVarianceGroup { .. })));
    }

    #[test]
    fn entropy_stats_examples() {
        assert_eq!(entropy_stats(&[1.0, 1.0, 1.0]).unwrap(), EntropyStats { mu: 1.0, sigma: 0.0 });
        assert_eq!(entropy_stats(&[0.0, 2.0]).unwrap(), EntropyStats { mu: 1.0, sigma: 1.0 });
        let a = entropy_stats(&[0.3, 1.7, 0.2, 0.9, 1.1]).unwrap();
        let b = entropy_stats(&[1.1, 0.2, 0.9, 1.7, 0.3]).unwrap();
        assert_eq!(a, b);
        assert!(matches!(entropy_stats(&[]), Err(LabError::EmptyInput(_))));
    }

    #[test]
    fn credit_score_examples() {
        let st = EntropyStats { mu: 1.0, sigma: 0.5 };
        assert_eq!(credit_score(1.0, st, 1.0, 2.0), 0.0);
        assert_eq!(credit_score(2.0, st, 1.0, 2.0), 0.5);
        assert_eq!(credit_score(-0.5, st, -2.0, 2.0), -1.0);
        assert_eq!(credit_score(5.0, EntropyStats { mu: 1.0, sigma: 0.0 }, 1.0, 2.0), 0.0);
    }

    #[test]
    fn shape_examples() {
        assert!(close(shape_advantage(1.0, 0.5, 0.2), 1.1, 1e-15));
        assert!(close(shape_advantage(-1.0, 0.5, 0.2), -1.1, 1e-15));
        assert_eq!(shape_advantage(0.7, 0.3, 0.0), 0.7);
        assert_eq!(shape_advantage(0.0, 0.3, 1.0), 0.0);
    }

    #[test]
    fn quadrant_examples() {
        assert_eq!(quadrant_label(1.0, 1.0, 1), Quadrant::Phr);
        assert_eq!(quadrant_label(0.5, 1.0, -1), Quadrant::Nlr);
        assert_eq!(quadrant_label(0.5, 1.0, 1), Quadrant::Plr);
        assert_eq!(quadrant_label(1.5, 1.0, -1), Quadrant::Nhr);
    }

    fn toy_batch() -> (Vec<TokenCredit>, Vec<EntropyStats>) {
        let ents = [0.1, 0.9, 0.5, 1.3, 0.2, 0.8, 0.05, 1.0, 0.6, 0.7];
        let tokens: Vec<TokenCredit> = ents
            .iter()
            .enumerate()
            .map(|(i, &h)| TokenCredit {
                group: 0,
                reward: if i < 5 { 1 } else { -1 },
                base: if i < 5 { 1.0 } else { -1.0 },
                entropy: h,
            })
            .collect();
        let stats = vec![entropy_stats(&ents).unwrap()];
        (tokens, stats)
    }

    #[test]
    fn wreinf_scales_positive_only() {
        let tokens = [
            TokenCredit { group: 0, reward: 1, base: 2.0, entropy: 0.3 },
            TokenCredit { group: 0, reward: -1, base: -1.0, entropy: 0.6 },
        ];
        let stats = [EntropyStats { mu: 0.45, sigma: 0.15 }];
        let s = baseline_shaping(Mode::WReinf, &tokens, &stats, &ShapingParams::default()).unwrap();
        let adv: Vec<f64> = s.tokens.iter().map(|t| t.advantage).collect();
        assert!(close(adv[0], 0.2, 1e-15));
        assert_eq!(adv[1], -1.0);
    }

    #[test]
    fn forking_keeps_top_fifth() {
        let (tokens, stats) = toy_batch();
        let s = baseline_shaping(Mode::Forking, &tokens, &stats, &ShapingParams::default()).unwrap();
        let kept: Vec<usize> = (0..10).filter(|&i| s.tokens[i].mask).collect();
        assert_eq!(kept, vec![3, 7]);
    }

    #[test]
    fn forking_ties_prefer_earlier_tokens() {
        let tokens: Vec<TokenCredit> = (0..5)
            .map(|_| TokenCredit { group: 0, reward: 1, base: 1.0, entropy: 0.5 })
            .collect();
        let stats = [EntropyStats { mu: 0.5, sigma: 0.0 }];
        let s = baseline_shaping(Mode::Forking, &tokens, &stats, &ShapingParams::default()).unwrap();
        let kept: Vec<bool> = s.tokens.iter().map(|t| t.mask).collect();
        assert_eq!(kept, vec![true, false, false, false, false]);
    }

    #[test]
    fn eapo_with_zero_alpha_is_grpo() {
        let (tokens, stats) = toy_batch();
        let p = ShapingParams { alpha: 0.0, ..ShapingParams::default() };
        let g = baseline_shaping(Mode::Grpo, &tokens, &stats, &p).unwrap();
        let e = baseline_shaping(Mode::Eapo, &tokens, &stats, &p).unwrap();
        assert_eq!(g, e);
    }

    #[test]
    fn entroadv_adds_nonnegative_bonus() {
        let (tokens, stats) = toy_batch();
        let s = baseline_shaping(Mode::EntroAdv, &tokens, &stats, &ShapingParams::default()).unwrap();
        for (t, s) in tokens.iter().zip(&s.tokens) {
            assert!(s.advantage >= t.base);
        }
    }

    #[test]
    fn entroreg_reports_coefficient() {
        let (tokens, stats) = toy_batch();
        let s = baseline_shaping(Mode::EntroReg, &tokens, &stats, &ShapingParams::default()).unwrap();
        assert_eq!(s.entropy_bonus, 0.001);
        assert!(s.tokens.iter().zip(&tokens).all(|(s, t)| s.advantage == t.base && s.mask));
    }

    #[test]
    fn quadrant_mode_masks_by_label() {
        let (tokens, stats) = toy_batch();
        let s = baseline_shaping(Mode::Quadrants(QuadrantSet::only(Quadrant::Nhr)), &tokens, &stats, &ShapingParams::default())
            .unwrap();
        for t in &s.tokens {
            assert_eq!(t.mask, t.shaped.quadrant == Quadrant::Nhr);
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("eapo".parse::<Mode>().unwrap(), Mode::Eapo);
        assert_eq!("PHR".parse::<Mode>().unwrap(), Mode::Quadrants(QuadrantSet::only(Quadrant::Phr)));
        let both: Mode = "phr+nhr".parse().unwrap();
        assert_eq!(both.name(), "phr+nhr");
        assert!(matches!("ppo".parse::<Mode>(), Err(LabError::Config(_))));
    }

    proptest! {
        #[test]
        fn quadrants_partition(h in 0.0f64..3.0, mu in 0.0f64..3.0, pos in any::<bool>()) {
            let r = if pos { 1 } else { -1 };
            let q = quadrant_label(h, mu, r);
            let hits = Quadrant::ALL.iter().filter(|&&x| x == q).count();
            prop_assert_eq!(hits, 1);
            prop_assert_eq!(matches!(q, Quadrant::Phr | Quadrant::Plr), pos);
        }

        #[test]
        fn credit_clip_and_sign(
            h in 0.0f64..3.0,
            mu in 0.0f64..3.0,
            sigma in 1e-6f64..2.0,
            base in prop_oneof![-3.0f64..-1e-6, 1e-6f64..3.0],
            phi in 1.0f64..4.0,
            alpha in 1e-3f64..=1.0,
        ) {
            let c = credit_score(h, EntropyStats { mu, sigma }, base, phi);
            prop_assert!(c.abs() <= base.abs() / phi);
            let shaped = shape_advantage(base, c, alpha);
            prop_assert_eq!(shaped.signum(), base.signum());
        }

        #[test]
        fn group_advantage_is_standardised(rs in prop::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], 2..32)) {
            if let Ok(a) = group_advantage(&rs) {
                let n = a.advantages.len() as f64;
                let mean = a.advantages.iter().sum::<f64>() / n;
                let var = a.advantages.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
            } else {
                prop_assert!(rs.iter().all(|&r| r == rs[0]));
            }
        }
    }
}
