//! Tabular softmax policy.
//!
//! A policy is a dense `state_count x vocab_size` table of logits. The token
//! distribution at a state is the temperature-scaled softmax of its row.
//! Entropy and log-probabilities always use the full softmax; nucleus
//! truncation only changes which token [`TokenDistribution::sample`] draws.

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Learnable logit table.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    state_count: usize,
    vocab_size: usize,
    logits: Vec<f64>,
}

/// Dense per-logit matrix with the same layout as [`PolicyParams`]; used for
/// gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMatrix {
    state_count: usize,
    vocab_size: usize,
    values: Vec<f64>,
}

/// Frozen copy of the parameters taken before a rollout phase.
#[derive(Debug, Clone)]
pub struct PolicySnapshot(Arc<PolicyParams>);

/// Next-token distribution at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    probs: Vec<f64>,
}

fn check_temperature(temperature: f64) -> Result<()> {
    if !temperature.is_finite() || temperature <= 0.0 {
        return Err(LabError::Config(format!(
            "temperature must be finite and positive, got {temperature}"
        )));
    }
    Ok(())
}

impl PolicyParams {
    /// All-zero logits, i.e. the uniform policy at every state.
    pub fn zeros(state_count: usize, vocab_size: usize) -> Result<Self> {
        if state_count == 0 {
            return Err(LabError::Config("state_count must be positive".into()));
        }
        if vocab_size < 2 {
            return Err(LabError::Config(format!(
                "vocab_size must be at least 2, got {vocab_size}"
            )));
        }
        Ok(Self {
            state_count,
            vocab_size,
            logits: vec![0.0; state_count * vocab_size],
        })
    }

    /// Builds params from explicit rows. Every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let state_count = rows.len();
        let vocab_size = rows.first().map_or(0, Vec::len);
        let mut params = Self::zeros(state_count, vocab_size)?;
        for (s, row) in rows.iter().enumerate() {
            if row.len() != vocab_size {
                return Err(LabError::Shape(format!(
                    "row {s} has {} entries, expected {vocab_size}",
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|z| !z.is_finite()) {
                return Err(LabError::Numerics(format!("non-finite logit {bad} in row {s}")));
            }
            params.logits[s * vocab_size..(s + 1) * vocab_size].copy_from_slice(row);
        }
        Ok(params)
    }

    /// Logits drawn independently from `N(0, scale^2)`; `scale == 0` gives zeros.
    pub fn random_normal<R: Rng>(
        state_count: usize,
        vocab_size: usize,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut params = Self::zeros(state_count, vocab_size)?;
        if scale != 0.0 {
            for z in &mut params.logits {
                *z = scale * standard_normal(rng);
            }
        }
        Ok(params)
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    fn check_state(&self, state: usize) -> Result<()> {
        if state >= self.state_count {
            return Err(LabError::Index(format!(
                "state {state} out of range for {} states",
                self.state_count
            )));
        }
        Ok(())
    }

    pub fn row(&self, state: usize) -> Result<&[f64]> {
        self.check_state(state)?;
        Ok(&self.logits[state * self.vocab_size..(state + 1) * self.vocab_size])
    }

    pub fn get(&self, state: usize, token: usize) -> f64 {
        self.logits[state * self.vocab_size + token]
    }

    pub fn set(&mut self, state: usize, token: usize, value: f64) {
        self.logits[state * self.vocab_size + token] = value;
    }

    /// Softmax of `logits[state] / temperature`, stabilised by max-subtraction.
    pub fn distribution(&self, state: usize, temperature: f64) -> Result<TokenDistribution> {
        check_temperature(temperature)?;
        let row = self.row(state)?;
        Ok(TokenDistribution::from_logits(row, temperature))
    }

    /// Natural log of `distribution(state, temperature)[token]`, computed in
    /// the log domain.
    pub fn log_prob(&self, state: usize, token: usize, temperature: f64) -> Result<f64> {
        check_temperature(temperature)?;
        let row = self.row(state)?;
        if token >= self.vocab_size {
            return Err(LabError::Index(format!(
                "token {token} out of range for vocab {}",
                self.vocab_size
            )));
        }
        Ok(log_softmax_at(row, token, temperature))
    }

    /// `logits -= lr * grads`.
    pub fn apply_update(&mut self, grads: &LogitMatrix, lr: f64) -> Result<()> {
        if grads.state_count != self.state_count || grads.vocab_size != self.vocab_size {
            return Err(LabError::Shape(format!(
                "gradient is {}x{}, params are {}x{}",
                grads.state_count, grads.vocab_size, self.state_count, self.vocab_size
            )));
        }
        if !lr.is_finite() || lr <= 0.0 {
            return Err(LabError::Config(format!("learning rate must be positive, got {lr}")));
        }
        if let Some(i) = grads.values.iter().position(|g| !g.is_finite()) {
            return Err(LabError::Numerics(format!(
                "non-finite gradient at state {}, token {}",
                i / self.vocab_size,
                i % self.vocab_size
            )));
        }
        for (z, g) in self.logits.iter_mut().zip(&grads.values) {
            *z -= lr * g;
        }
        Ok(())
    }

    pub fn snapshot(&self) -> PolicySnapshot {
        PolicySnapshot(Arc::new(self.clone()))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            state_count: self.state_count,
            vocab_size: self.vocab_size,
            logits: self
                .logits
                .chunks(self.vocab_size)
                .map(<[f64]>::to_vec)
                .collect(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let params = Self::from_rows(&ckpt.logits)?;
        if params.state_count != ckpt.state_count || params.vocab_size != ckpt.vocab_size {
            return Err(LabError::Shape(format!(
                "checkpoint declares {}x{} but holds {}x{} logits",
                ckpt.state_count, ckpt.vocab_size, params.state_count, params.vocab_size
            )));
        }
        Ok(params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_checkpoint()).expect("checkpoint serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)
            .map_err(|e| LabError::Parse { line: e.line(), message: e.to_string() })?;
        Self::from_checkpoint(&ckpt)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::from_json(&text)
    }
}

/// On-disk checkpoint layout: row-major array of logit rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub state_count: usize,
    pub vocab_size: usize,
    pub logits: Vec<Vec<f64>>,
}

impl LogitMatrix {
    pub fn zeros(state_count: usize, vocab_size: usize) -> Self {
        Self {
            state_count,
            vocab_size,
            values: vec![0.0; state_count * vocab_size],
        }
    }

    pub fn like(params: &PolicyParams) -> Self {
        Self::zeros(params.state_count, params.vocab_size)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let vocab_size = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != vocab_size) {
            return Err(LabError::Shape("ragged gradient rows".into()));
        }
        Ok(Self {
            state_count: rows.len(),
            vocab_size,
            values: rows.concat(),
        })
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, state: usize, token: usize) -> f64 {
        self.values[state * self.vocab_size + token]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.vocab_size..(state + 1) * self.vocab_size]
    }

    pub fn row_mut(&mut self, state: usize) -> &mut [f64] {
        &mut self.values[state * self.vocab_size..(state + 1) * self.vocab_size]
    }

    pub fn add_at(&mut self, state: usize, token: usize, delta: f64) {
        self.values[state * self.vocab_size + token] += delta;
    }

    /// States with at least one non-zero entry.
    pub fn touched_states(&self) -> Vec<usize> {
        (0..self.state_count)
            .filter(|&s| self.row(s).iter().any(|&g| g != 0.0))
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

impl std::ops::AddAssign<&LogitMatrix> for LogitMatrix {
    fn add_assign(&mut self, rhs: &LogitMatrix) {
        assert_eq!(self.values.len(), rhs.values.len(), "gradient shape mismatch");
        for (a, b) in self.values.iter_mut().zip(&rhs.values) {
            *a += b;
        }
    }
}

impl PolicySnapshot {
    pub fn params(&self) -> &PolicyParams {
        &self.0
    }
}

impl std::ops::Deref for PolicySnapshot {
    type Target = PolicyParams;

    fn deref(&self) -> &PolicyParams {
        &self.0
    }
}

fn log_softmax_at(row: &[f64], token: usize, temperature: f64) -> f64 {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &z| m.max(z / temperature));
    let log_norm: f64 = row.iter().map(|&z| (z / temperature - max).exp()).sum::<f64>().ln();
    row[token] / temperature - max - log_norm
}

/// Box-Muller draw from the standard normal.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

impl TokenDistribution {
    /// Validates and wraps an explicit probability vector.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(LabError::Distribution("empty probability vector".into()));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(LabError::Distribution("entry outside [0, 1]".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(LabError::Distribution(format!("entries sum to {total}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn from_logits(row: &[f64], temperature: f64) -> Self {
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &z| m.max(z / temperature));
        let mut probs: Vec<f64> = row.iter().map(|&z| (z / temperature - max).exp()).collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Shannon entropy in nats, with `0 ln 0 = 0`.
    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.probs)
    }

    /// Smallest prefix of tokens, ordered by descending probability with ties
    /// broken by lower id, whose mass reaches `top_p`.
    pub fn nucleus(&self, top_p: f64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.probs.len()).collect();
        order.sort_by(|&a, &b| self.probs[b].total_cmp(&self.probs[a]).then(a.cmp(&b)));
        let mut cum = 0.0;
        let mut keep = Vec::new();
        for tok in order {
            keep.push(tok);
            cum += self.probs[tok];
            if cum >= top_p - 1e-12 {
                break;
            }
        }
        keep
    }

    /// Nucleus sampling; `top_p >= 1` is plain categorical sampling.
    pub fn sample<R: Rng + ?Sized>(&self, top_p: f64, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        if top_p >= 1.0 {
            return categorical(self.probs.iter().copied().enumerate(), u);
        }
        let nucleus = self.nucleus(top_p);
        let mass: f64 = nucleus.iter().map(|&t| self.probs[t]).sum();
        categorical(nucleus.iter().map(|&t| (t, self.probs[t] / mass)), u)
    }
}

/// Inverse-CDF draw; falls back to the last positive-mass token when
/// rounding leaves `u` beyond the accumulated mass.
fn categorical(weights: impl Iterator<Item = (usize, f64)>, u: f64) -> usize {
    let mut cum = 0.0;
    let mut last = 0;
    for (tok, p) in weights {
        if p <= 0.0 {
            continue;
        }
        cum += p;
        last = tok;
        if u < cum {
            return tok;
        }
    }
    last
}

/// `-sum p ln p` in nats.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_row(row: &[f64]) -> PolicyParams {
        PolicyParams::from_rows(&[row.to_vec()]).unwrap()
    }

    #[test]
    fn distribution_examples() {
        let p = single_row(&[0.0, 0.0]).distribution(0, 1.0).unwrap();
        assert_eq!(p.probs(), &[0.5, 0.5]);

        let e = std::f64::consts::E;
        let p = single_row(&[1.0, 0.0]).distribution(0, 1.0).unwrap();
        assert!((p.probs()[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((p.probs()[0] - 0.731059).abs() < 1e-6);

        let p = single_row(&[1.0, 0.0]).distribution(0, 0.5).unwrap();
        let e2 = e * e;
        assert!((p.probs()[0] - e2 / (e2 + 1.0)).abs() < 1e-15);
        assert!((p.probs()[1] - 0.119203).abs() < 1e-6);
    }

    #[test]
    fn distribution_errors() {
        let params = single_row(&[0.0, 0.0]);
        assert!(matches!(params.distribution(1, 1.0), Err(LabError::Index(_))));
        assert!(matches!(params.distribution(0, f64::NAN), Err(LabError::Config(_))));
        assert!(matches!(params.distribution(0, f64::INFINITY), Err(LabError::Config(_))));
        assert!(matches!(params.log_prob(0, 2, 1.0), Err(LabError::Index(_))));
    }

    #[test]
    fn entropy_examples() {
        assert!((TokenDistribution::uniform(4).entropy() - 4f64.ln()).abs() < 1e-15);
        let one_hot = TokenDistribution::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(one_hot.entropy(), 0.0);
        let p = single_row(&[1.0, 0.0]).distribution(0, 1.0).unwrap();
        let direct = -(p.probs()[0] * p.probs()[0].ln() + p.probs()[1] * p.probs()[1].ln());
        assert!((p.entropy() - direct).abs() < 1e-15);
        assert!((p.entropy() - 0.582203).abs() < 1e-6);
    }

    #[test]
    fn log_prob_examples() {
        let lp = single_row(&[0.0, 0.0]).log_prob(0, 0, 1.0).unwrap();
        assert!((lp - 0.5f64.ln()).abs() < 1e-15);
        let lp = single_row(&[1.0, 0.0]).log_prob(0, 0, 1.0).unwrap();
        assert!((lp + 0.313262).abs() < 1e-6);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let params = PolicyParams::random_normal(3, 5, 3.0, &mut rng).unwrap();
            let s = rng.gen_range(0..3);
            let t = rng.gen_range(0..5);
            let temp = rng.gen_range(0.3..2.0);
            let p = params.distribution(s, temp).unwrap().probs()[t];
            let lp = params.log_prob(s, t, temp).unwrap();
            assert!((lp.exp() - p).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_degenerate_and_nucleus() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = TokenDistribution::new(vec![1.0, 0.0, 0.0]).unwrap();
        for top_p in [0.1, 0.95, 1.0] {
            for _ in 0..50 {
                assert_eq!(d.sample(top_p, &mut rng), 0);
            }
        }
        let d = TokenDistribution::new(vec![0.5, 0.3, 0.15, 0.05]).unwrap();
        assert_eq!(d.nucleus(0.95), vec![0, 1, 2]);
        for _ in 0..5000 {
            assert_ne!(d.sample(0.95, &mut rng), 3);
        }
    }

    #[test]
    fn nucleus_ties_prefer_lower_ids() {
        let d = TokenDistribution::uniform(4);
        assert_eq!(d.nucleus(0.5), vec![0, 1]);
    }

    #[test]
    fn sample_uniform_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let d = TokenDistribution::uniform(4);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[d.sample(1.0, &mut rng)] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 0.25).abs() <= 0.02, "{counts:?}");
        }
    }

    #[test]
    fn sample_is_reproducible() {
        let d = TokenDistribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200).map(|_| d.sample(1.0, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
    }

    #[test]
    fn update_examples() {
        let mut params = single_row(&[0.0, 0.0]);
        let g = LogitMatrix::from_rows(&[vec![1.0, -1.0]]).unwrap();
        params.apply_update(&g, 0.1).unwrap();
        assert_eq!(params.row(0).unwrap(), &[-0.1, 0.1]);

        let before = params.clone();
        params.apply_update(&LogitMatrix::like(&params), 0.1).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn update_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let start = PolicyParams::random_normal(4, 3, 1.0, &mut rng).unwrap();
        let g1 = LogitMatrix::from_rows(
            &(0..4).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect::<Vec<_>>(),
        )
        .unwrap();
        let g2 = LogitMatrix::from_rows(
            &(0..4).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect::<Vec<_>>(),
        )
        .unwrap();
        let mut seq = start.clone();
        seq.apply_update(&g1, 0.05).unwrap();
        seq.apply_update(&g2, 0.05).unwrap();
        let mut sum = g1.clone();
        sum += &g2;
        let mut once = start;
        once.apply_update(&sum, 0.05).unwrap();
        for (a, b) in seq.logits().iter().zip(once.logits()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn update_errors() {
        let mut params = single_row(&[0.0, 0.0]);
        let wrong = LogitMatrix::zeros(2, 2);
        assert!(matches!(params.apply_update(&wrong, 0.1), Err(LabError::Shape(_))));
        let nan = LogitMatrix::from_rows(&[vec![f64::NAN, 0.0]]).unwrap();
        assert!(matches!(params.apply_update(&nan, 0.1), Err(LabError::Numerics(_))));
    }

    #[test]
    fn checkpoint_round_trip_is_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let params = PolicyParams::random_normal(5, 6, 2.5, &mut rng).unwrap();
        let back = PolicyParams::from_json(&params.to_json()).unwrap();
        assert_eq!(params, back);
        let ck: serde_json::Value = serde_json::from_str(&params.to_json()).unwrap();
        assert_eq!(ck["state_count"], 5);
        assert_eq!(ck["logits"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn snapshot_is_frozen() {
        let mut params = single_row(&[0.0, 0.0]);
        let snap = params.snapshot();
        params.set(0, 0, 3.0);
        assert_eq!(snap.row(0).unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(matches!(PolicyParams::zeros(0, 3), Err(LabError::Config(_))));
        assert!(matches!(PolicyParams::zeros(2, 1), Err(LabError::Config(_))));
        assert!(matches!(
            PolicyParams::from_rows(&[vec![0.0, 1.0], vec![0.0]]),
            Err(LabError::Shape(_))
        ));
    }
}
