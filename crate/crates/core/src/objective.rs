//! Clipped group-relative surrogate loss and its exact logit gradient.
//!
//! For a batch of `N` tokens (counted regardless of masking) the loss is
//!
//! ```text
//! L = -(1/N) * sum_tokens mask * min(rho * A, clip(rho, 1 - eps_low, 1 + eps_high) * A)
//!     - (c/N) * sum_tokens mask * H(pi(. | s))
//! ```
//!
//! with `rho = exp(logp_new - logp_old)` and `A` treated as a constant. The
//! entropy term is only non-zero for the entropy-regularised baseline.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::credit::{Quadrant, QuadrantSet};
use crate::error::{LabError, Result};
use crate::policy::{LogitMatrix, PolicyParams, TokenDistribution};

/// Ratios above this are reported as a numerical failure.
pub const RATIO_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipConfig {
    pub eps_low: f64,
    pub eps_high: f64,
}

impl Default for ClipConfig {
    fn default() -> Self {
        Self { eps_low: 0.20, eps_high: 0.28 }
    }
}

impl ClipConfig {
    pub fn new(eps_low: f64, eps_high: f64) -> Result<Self> {
        if !(eps_low > 0.0 && eps_low < 1.0) {
            return Err(LabError::Config(format!("eps_low must lie in (0, 1), got {eps_low}")));
        }
        if !(eps_high > 0.0) || !eps_high.is_finite() {
            return Err(LabError::Config(format!("eps_high must be positive, got {eps_high}")));
        }
        Ok(Self { eps_low, eps_high })
    }

    fn region(&self, rho: f64) -> i8 {
        if rho < 1.0 - self.eps_low {
            -1
        } else if rho > 1.0 + self.eps_high {
            1
        } else {
            0
        }
    }
}

/// Everything the loss needs to know about one token.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchToken {
    pub state: usize,
    pub token: usize,
    /// Log-probability under the rollout snapshot.
    pub logp_old: f64,
    /// Advantage entering the surrogate (already shaped; constant).
    pub advantage: f64,
    pub quadrant: Quadrant,
    /// Whether the token participates in the optimised objective.
    pub mask: bool,
}

/// Ordered tokens of a (mini-)batch plus the loss normaliser.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub tokens: Vec<BatchToken>,
    /// `sum_i |o_i|`; equals the token count unless the batch is a slice of
    /// a larger one.
    pub normalizer: f64,
}

impl Batch {
    pub fn new(tokens: Vec<BatchToken>) -> Self {
        let normalizer = tokens.len() as f64;
        Self { tokens, normalizer }
    }

    /// Sub-batch that keeps this batch's normaliser.
    pub fn restricted(&self, keep: impl Fn(&BatchToken) -> bool) -> Self {
        Self {
            tokens: self.tokens.iter().copied().filter(|t| keep(t)).collect(),
            normalizer: self.normalizer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub clip: ClipConfig,
    pub temperature: f64,
    /// Coefficient `c` of the differentiable entropy bonus.
    pub entropy_bonus: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self { clip: ClipConfig::default(), temperature: 1.0, entropy_bonus: 0.0 }
    }
}

/// Loss split over quadrants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    /// Indexed by [`Quadrant::index`].
    pub per_quadrant: [f64; 4],
    /// Tokens in the normaliser.
    pub token_count: usize,
    /// Tokens that contributed a term.
    pub selected_count: usize,
    pub ratio: RatioStats,
}

impl LossBreakdown {
    pub fn quadrant(&self, q: Quadrant) -> f64 {
        self.per_quadrant[q.index()]
    }
}

/// Importance-ratio diagnostics over the selected tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Share of selected tokens whose clipped branch attained the min.
    pub clip_fraction: f64,
}

/// `exp(logp_new - logp_old)`.
pub fn importance_ratio(logp_new: f64, logp_old: f64) -> Result<f64> {
    let rho = (logp_new - logp_old).exp();
    if !rho.is_finite() || rho > RATIO_CAP {
        return Err(LabError::Numerics(format!(
            "importance ratio {rho:e} exceeds cap {RATIO_CAP:e}"
        )));
    }
    Ok(rho)
}

/// `min(rho * A, clip(rho, 1 - eps_low, 1 + eps_high) * A)`.
pub fn surrogate_term(rho: f64, adv: f64, clip: ClipConfig) -> f64 {
    let unclipped = rho * adv;
    let clipped = rho.clamp(1.0 - clip.eps_low, 1.0 + clip.eps_high) * adv;
    unclipped.min(clipped)
}

/// True when the unclipped branch attains the min; ties go to it.
fn unclipped_selected(rho: f64, adv: f64, clip: ClipConfig) -> bool {
    rho * adv <= rho.clamp(1.0 - clip.eps_low, 1.0 + clip.eps_high) * adv
}

fn check_token(params: &PolicyParams, t: &BatchToken) -> Result<()> {
    if t.state >= params.state_count() || t.token >= params.vocab_size() {
        return Err(LabError::Shape(format!(
            "token (state {}, token {}) outside {}x{} params",
            t.state,
            t.token,
            params.state_count(),
            params.vocab_size()
        )));
    }
    Ok(())
}

/// Ratio and the un-normalised surrogate and entropy-bonus loss terms of one
/// token.
fn token_terms(params: &PolicyParams, t: &BatchToken, cfg: &ObjectiveConfig) -> Result<(f64, f64, f64)> {
    let logp = params.log_prob(t.state, t.token, cfg.temperature)?;
    let rho = importance_ratio(logp, t.logp_old)?;
    let surrogate = -surrogate_term(rho, t.advantage, cfg.clip);
    let entropy = if cfg.entropy_bonus != 0.0 {
        -cfg.entropy_bonus * params.distribution(t.state, cfg.temperature)?.entropy()
    } else {
        0.0
    };
    Ok((rho, surrogate, entropy))
}

/// Loss over tokens that are masked in and whose quadrant is in `selection`.
pub fn batch_loss(
    params: &PolicyParams,
    batch: &Batch,
    cfg: &ObjectiveConfig,
    selection: QuadrantSet,
) -> Result<LossBreakdown> {
    if batch.tokens.is_empty() {
        return Err(LabError::EmptyInput("batch has no tokens".into()));
    }
    let n = batch.normalizer;
    let mut per_quadrant = [0.0; 4];
    let mut selected = 0usize;
    let (mut rmin, mut rmax, mut rsum, mut clipped) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in &batch.tokens {
        check_token(params, t)?;
        if !t.mask || !selection.contains(t.quadrant) {
            continue;
        }
        let (rho, surrogate, entropy) = token_terms(params, t, cfg)?;
        per_quadrant[t.quadrant.index()] += (surrogate + entropy) / n;
        selected += 1;
        rmin = rmin.min(rho);
        rmax = rmax.max(rho);
        rsum += rho;
        if !unclipped_selected(rho, t.advantage, cfg.clip) {
            clipped += 1;
        }
    }
    let ratio = if selected == 0 {
        RatioStats { min: 1.0, max: 1.0, mean: 1.0, clip_fraction: 0.0 }
    } else {
        RatioStats {
            min: rmin,
            max: rmax,
            mean: rsum / selected as f64,
            clip_fraction: clipped as f64 / selected as f64,
        }
    };
    Ok(LossBreakdown {
        total: per_quadrant.iter().sum(),
        per_quadrant,
        token_count: batch.tokens.len(),
        selected_count: selected,
        ratio,
    })
}

/// Exact gradient of [`batch_loss`] with respect to the current logits.
///
/// Tokens are accumulated in batch order. A token whose clipped branch
/// attains the min contributes nothing through the surrogate.
pub fn analytic_gradients(
    params: &PolicyParams,
    batch: &Batch,
    cfg: &ObjectiveConfig,
    selection: QuadrantSet,
) -> Result<LogitMatrix> {
    let mut grad = LogitMatrix::like(params);
    let n = batch.normalizer;
    let inv_temp = 1.0 / cfg.temperature;
    for t in &batch.tokens {
        check_token(params, t)?;
        if !t.mask || !selection.contains(t.quadrant) {
            continue;
        }
        let dist = params.distribution(t.state, cfg.temperature)?;
        let probs = dist.probs();
        let logp = params.log_prob(t.state, t.token, cfg.temperature)?;
        let rho = importance_ratio(logp, t.logp_old)?;
        let row = grad.row_mut(t.state);
        if unclipped_selected(rho, t.advantage, cfg.clip) && t.advantage != 0.0 {
            // d/dz_v [-(rho A)/n] = -(A rho / n) (1/T) (1[v = a] - pi_v)
            let scale = -t.advantage * rho * inv_temp / n;
            for (v, g) in row.iter_mut().enumerate() {
                let indicator = if v == t.token { 1.0 } else { 0.0 };
                *g += scale * (indicator - probs[v]);
            }
        }
        if cfg.entropy_bonus != 0.0 {
            // d/dz_v [-(c/n) H] = (c/n) (1/T) pi_v (ln pi_v + H)
            let h = dist.entropy();
            let scale = cfg.entropy_bonus * inv_temp / n;
            for (v, g) in row.iter_mut().enumerate() {
                if probs[v] > 0.0 {
                    *g += scale * probs[v] * (probs[v].ln() + h);
                }
            }
        }
    }
    Ok(grad)
}

/// Descent direction for one token at ratio one:
/// `A (1 - pi_a)` on the sampled token and `-A pi_v` elsewhere.
pub fn simplified_gradient(pi: &TokenDistribution, sampled: usize, adv: f64) -> Vec<f64> {
    pi.probs()
        .iter()
        .enumerate()
        .map(|(v, &p)| if v == sampled { adv * (1.0 - p) } else { -adv * p })
        .collect()
}

/// Result of a finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    /// `max |analytic - fd| / max(|fd|, 1e-8)` over checked coordinates.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates skipped because a clip region changes within `+/- h`.
    pub excluded: Vec<(usize, usize)>,
}

/// Central-difference check of [`analytic_gradients`] on a random subset of
/// at least `min_coords` logits (all of them if fewer exist).
pub fn fd_check(
    params: &PolicyParams,
    batch: &Batch,
    cfg: &ObjectiveConfig,
    h: f64,
    min_coords: usize,
    seed: u64,
) -> Result<FdReport> {
    let grad = analytic_gradients(params, batch, cfg, QuadrantSet::ALL)?;
    fd_compare(params, batch, cfg, &grad, h, min_coords, seed)
}

/// Compares a supplied gradient against central differences of
/// [`batch_loss`]. Split out so a corrupted gradient can be checked.
pub fn fd_compare(
    params: &PolicyParams,
    batch: &Batch,
    cfg: &ObjectiveConfig,
    grad: &LogitMatrix,
    h: f64,
    min_coords: usize,
    seed: u64,
) -> Result<FdReport> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(LabError::Config(format!("finite-difference step {h} outside [1e-7, 1e-3]")));
    }
    if grad.state_count() != params.state_count() || grad.vocab_size() != params.vocab_size() {
        return Err(LabError::Shape("gradient does not match params".into()));
    }
    let vocab = params.vocab_size();
    let total = params.state_count() * vocab;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords: Vec<usize> = sample(&mut rng, total, min_coords.min(total)).into_vec();
    coords.sort_unstable();

    let mut report = FdReport { max_rel_error: 0.0, checked: 0, excluded: Vec::new() };
    for idx in coords {
        let (s, v) = (idx / vocab, idx % vocab);
        // Terms of other states do not depend on this logit.
        let local = batch.restricted(|t| t.state == s);
        let analytic = grad.get(s, v);
        if local.tokens.is_empty() {
            report.checked += 1;
            report.max_rel_error = report.max_rel_error.max(analytic.abs() / 1e-8);
            continue;
        }
        let mut plus = params.clone();
        plus.set(s, v, params.get(s, v) + h);
        let mut minus = params.clone();
        minus.set(s, v, params.get(s, v) - h);
        if regions_change(params, &plus, &minus, &local, cfg)? {
            report.excluded.push((s, v));
            continue;
        }
        // Differencing term by term lets constant (clipped) terms cancel exactly.
        let mut diff = 0.0;
        for t in local.tokens.iter().filter(|t| t.mask) {
            let (_, sp, ep) = token_terms(&plus, t, cfg)?;
            let (_, sm, em) = token_terms(&minus, t, cfg)?;
            diff += ((sp - sm) + (ep - em)) / batch.normalizer;
        }
        let fd = diff / (2.0 * h);
        let err = (analytic - fd).abs() / fd.abs().max(1e-8);
        report.max_rel_error = report.max_rel_error.max(err);
        report.checked += 1;
    }
    Ok(report)
}

fn regions_change(
    base: &PolicyParams,
    plus: &PolicyParams,
    minus: &PolicyParams,
    batch: &Batch,
    cfg: &ObjectiveConfig,
) -> Result<bool> {
    for t in batch.tokens.iter().filter(|t| t.mask) {
        let region = |p: &PolicyParams| -> Result<i8> {
            let rho = importance_ratio(p.log_prob(t.state, t.token, cfg.temperature)?, t.logp_old)?;
            Ok(cfg.clip.region(rho))
        };
        let r0 = region(base)?;
        if region(plus)? != r0 || region(minus)? != r0 {
            return Ok(true);
        }
    }
    Ok(false)
}
