//! Synthetic verifiable tasks with terminal +/-1 rewards.
//!
//! [`ForkArithTask`] walks a value through `horizon` modular-arithmetic
//! operations chosen by the policy and pays +1 when the final value hits the
//! target. The Markov state `(step, value)` is encoded as
//! `step * modulus + value`. [`ConstantTask`] has exactly one rewarded
//! sequence and serves as a degenerate oracle.
//!
//! [`enumerate_solutions`] is the exactness oracle: it brute-forces every
//! sequence and tabulates, for each `(state, token)`, how many completions
//! succeed.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::policy::PolicyParams;

/// Largest search space [`enumerate_solutions`] will walk.
pub const ENUMERATION_BUDGET: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Op {
    Add { c: i64 },
    Mul { c: i64 },
    Noop,
}

impl Op {
    pub fn apply(self, value: u64, modulus: u64) -> u64 {
        let m = modulus as i64;
        let v = value as i64;
        let out = match self {
            Op::Add { c } => v + c.rem_euclid(m),
            Op::Mul { c } => v * c.rem_euclid(m),
            Op::Noop => v,
        };
        out.rem_euclid(m) as u64
    }

    pub fn label(self) -> String {
        match self {
            Op::Add { c } => format!("add{c}"),
            Op::Mul { c } => format!("mul{c}"),
            Op::Noop => "noop".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForkArithTask {
    pub start: u64,
    pub target: u64,
    pub modulus: u64,
    pub horizon: usize,
    pub ops: Vec<Op>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstantTask {
    pub required: Vec<usize>,
    pub vocab_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Task {
    ForkArith(ForkArithTask),
    Constant(ConstantTask),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EpisodeState {
    pub step: usize,
    pub value: u64,
}

/// Result of exhaustive enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTable {
    pub total_sequences: u64,
    pub correct_count: u64,
    vocab_size: usize,
    /// `completions[state * vocab + token]`: succeeding completions after
    /// emitting `token` in `state`.
    completions: Vec<u64>,
    /// `from_state[state]`: succeeding completions starting at `state`.
    from_state: Vec<u64>,
    /// Remaining sequence count after a token emitted at each step.
    remaining_after: Vec<u64>,
    state_step: Vec<usize>,
}

impl ForkArithTask {
    pub fn new(start: u64, target: u64, modulus: u64, horizon: usize, ops: Vec<Op>) -> Result<Self> {
        let task = Self { start, target, modulus, horizon, ops };
        task.validate()?;
        Ok(task)
    }

    fn validate(&self) -> Result<()> {
        if self.modulus < 2 {
            return Err(LabError::Config(format!("modulus must be >= 2, got {}", self.modulus)));
        }
        if self.start >= self.modulus || self.target >= self.modulus {
            return Err(LabError::Config("start and target must lie in [0, modulus)".into()));
        }
        if self.horizon == 0 {
            return Err(LabError::Config("horizon must be >= 1".into()));
        }
        if self.ops.len() < 2 {
            return Err(LabError::Config("op vocabulary needs at least 2 ops".into()));
        }
        Ok(())
    }
}

impl ConstantTask {
    pub fn new(required: Vec<usize>, vocab_size: usize) -> Result<Self> {
        if required.is_empty() {
            return Err(LabError::Config("required sequence is empty".into()));
        }
        if vocab_size < 2 || required.iter().any(|&t| t >= vocab_size) {
            return Err(LabError::Config("required tokens must lie in a vocab of size >= 2".into()));
        }
        Ok(Self { required, vocab_size })
    }
}

impl Task {
    pub fn horizon(&self) -> usize {
        match self {
            Task::ForkArith(t) => t.horizon,
            Task::Constant(t) => t.required.len(),
        }
    }

    pub fn vocab_size(&self) -> usize {
        match self {
            Task::ForkArith(t) => t.ops.len(),
            Task::Constant(t) => t.vocab_size,
        }
    }

    /// Number of encodable states, terminal states included.
    pub fn state_count(&self) -> usize {
        match self {
            Task::ForkArith(t) => (t.horizon + 1) * t.modulus as usize,
            Task::Constant(t) => t.required.len() + 1,
        }
    }

    pub fn reset(&self) -> EpisodeState {
        match self {
            Task::ForkArith(t) => EpisodeState { step: 0, value: t.start },
            Task::Constant(_) => EpisodeState { step: 0, value: 0 },
        }
    }

    pub fn step(&self, state: EpisodeState, token: usize) -> Result<EpisodeState> {
        if state.step >= self.horizon() {
            return Err(LabError::EpisodeDone { step: state.step });
        }
        if token >= self.vocab_size() {
            return Err(LabError::Index(format!(
                "token {token} out of range for vocab {}",
                self.vocab_size()
            )));
        }
        Ok(match self {
            Task::ForkArith(t) => EpisodeState {
                step: state.step + 1,
                value: t.ops[token].apply(state.value, t.modulus),
            },
            Task::Constant(_) => EpisodeState { step: state.step + 1, value: 0 },
        })
    }

    /// Terminal reward: +1 on success, -1 otherwise.
    pub fn verify(&self, tokens: &[usize]) -> Result<i8> {
        if tokens.len() != self.horizon() {
            return Err(LabError::Length { expected: self.horizon(), got: tokens.len() });
        }
        let ok = match self {
            Task::ForkArith(t) => {
                let mut state = self.reset();
                for &tok in tokens {
                    state = self.step(state, tok)?;
                }
                state.value == t.target
            }
            Task::Constant(t) => tokens == t.required.as_slice(),
        };
        Ok(if ok { 1 } else { -1 })
    }

    pub fn state_id(&self, state: EpisodeState) -> usize {
        match self {
            Task::ForkArith(t) => state.step * t.modulus as usize + state.value as usize,
            Task::Constant(_) => state.step,
        }
    }

    pub fn decode_state(&self, id: usize) -> EpisodeState {
        match self {
            Task::ForkArith(t) => {
                let m = t.modulus as usize;
                EpisodeState { step: id / m, value: (id % m) as u64 }
            }
            Task::Constant(_) => EpisodeState { step: id, value: 0 },
        }
    }

    /// States visited by some sequence, in `state_id` order.
    pub fn reachable_states(&self) -> Vec<EpisodeState> {
        let mut seen = vec![false; self.state_count()];
        let mut frontier = vec![self.reset()];
        seen[self.state_id(self.reset())] = true;
        let mut out = vec![self.reset()];
        while let Some(state) = frontier.pop() {
            if state.step == self.horizon() {
                continue;
            }
            for tok in 0..self.vocab_size() {
                let next = self.step(state, tok).expect("non-terminal step");
                let id = self.state_id(next);
                if !seen[id] {
                    seen[id] = true;
                    out.push(next);
                    frontier.push(next);
                }
            }
        }
        out.sort_by_key(|s| self.state_id(*s));
        out
    }

    pub fn from_file(path: &Path) -> Result<Vec<Task>> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        tasks_from_json(&text)
    }
}

impl SolutionTable {
    /// Succeeding completions after emitting `token` in `state`.
    pub fn completions(&self, state: usize, token: usize) -> u64 {
        self.completions[state * self.vocab_size + token]
    }

    pub fn from_state(&self, state: usize) -> u64 {
        self.from_state[state]
    }

    pub fn success_fraction(&self) -> f64 {
        self.correct_count as f64 / self.total_sequences as f64
    }

    /// Success probability of a uniformly random completion after emitting
    /// `token` in `state`.
    pub fn uniform_success_prob(&self, state: usize, token: usize) -> f64 {
        let step = self.state_step[state];
        self.completions(state, token) as f64 / self.remaining_after[step] as f64
    }

    /// States where at least two tokens have succeeding completions.
    pub fn fork_states(&self) -> Vec<usize> {
        (0..self.from_state.len())
            .filter(|&s| {
                (0..self.vocab_size)
                    .filter(|&a| self.completions(s, a) > 0)
                    .count()
                    >= 2
            })
            .collect()
    }
}

/// Exhaustive oracle over all `vocab^horizon` sequences.
///
/// Totals come from direct enumeration with [`Task::verify`]; the per-prefix
/// table comes from a backward pass over the Markov state graph. For
/// [`ConstantTask`] the per-prefix counts assume an on-path prefix, since its
/// state id only records the step.
pub fn enumerate_solutions(task: &Task) -> Result<SolutionTable> {
    let vocab = task.vocab_size();
    let horizon = task.horizon();
    let size = (vocab as u128).checked_pow(horizon as u32).unwrap_or(u128::MAX);
    if size > ENUMERATION_BUDGET {
        return Err(LabError::Budget { size, budget: ENUMERATION_BUDGET });
    }

    let mut tokens = vec![0usize; horizon];
    let mut correct = 0u64;
    for _ in 0..size {
        if task.verify(&tokens)? == 1 {
            correct += 1;
        }
        for digit in tokens.iter_mut().rev() {
            *digit += 1;
            if *digit < vocab {
                break;
            }
            *digit = 0;
        }
    }

    let states = task.state_count();
    let mut from_state = vec![0u64; states];
    let mut completions = vec![0u64; states * vocab];
    let state_step: Vec<usize> = (0..states).map(|id| task.decode_state(id).step).collect();
    match task {
        Task::ForkArith(t) => {
            for id in 0..states {
                let st = task.decode_state(id);
                if st.step == horizon && st.value == t.target {
                    from_state[id] = 1;
                }
            }
            for step in (0..horizon).rev() {
                for value in 0..t.modulus {
                    let st = EpisodeState { step, value };
                    let id = task.state_id(st);
                    let mut total = 0;
                    for a in 0..vocab {
                        let next = task.state_id(task.step(st, a)?);
                        completions[id * vocab + a] = from_state[next];
                        total += from_state[next];
                    }
                    from_state[id] = total;
                }
            }
        }
        Task::Constant(t) => {
            from_state[horizon] = 1;
            for step in (0..horizon).rev() {
                completions[step * vocab + t.required[step]] = 1;
                from_state[step] = 1;
            }
        }
    }
    let remaining_after = (0..=horizon)
        .map(|step| (vocab as u64).pow(horizon.saturating_sub(step + 1) as u32))
        .collect();

    Ok(SolutionTable {
        total_sequences: size as u64,
        correct_count: correct,
        vocab_size: vocab,
        completions,
        from_state,
        remaining_after,
        state_step,
    })
}

/// Exact success probabilities of `params` on an enumerable task.
#[derive(Debug, Clone)]
pub struct PolicySuccess {
    vocab_size: usize,
    /// `after[state * vocab + token]`: P(success | emit token in state).
    after: Vec<f64>,
    /// P(success | state).
    at: Vec<f64>,
}

impl PolicySuccess {
    pub fn after(&self, state: usize, token: usize) -> f64 {
        self.after[state * self.vocab_size + token]
    }

    pub fn at(&self, state: usize) -> f64 {
        self.at[state]
    }
}

/// Backward pass computing `P(r = +1 | s, a)` under `params` with sampling
/// at `temperature` (no nucleus truncation).
pub fn policy_success(task: &Task, params: &PolicyParams, temperature: f64) -> Result<PolicySuccess> {
    let vocab = task.vocab_size();
    let horizon = task.horizon();
    let states = task.state_count();
    if params.state_count() != states || params.vocab_size() != vocab {
        return Err(LabError::Shape(format!(
            "policy is {}x{}, task needs {states}x{vocab}",
            params.state_count(),
            params.vocab_size()
        )));
    }
    let mut at = vec![0.0; states];
    let mut after = vec![0.0; states * vocab];
    let Task::ForkArith(t) = task else {
        // On-path convention, as in `enumerate_solutions`.
        let Task::Constant(c) = task else { unreachable!() };
        at[horizon] = 1.0;
        for step in (0..horizon).rev() {
            after[step * vocab + c.required[step]] = at[step + 1];
            let dist = params.distribution(step, temperature)?;
            at[step] = dist.probs()[c.required[step]] * at[step + 1];
        }
        return Ok(PolicySuccess { vocab_size: vocab, after, at });
    };
    for value in 0..t.modulus {
        if value == t.target {
            at[task.state_id(EpisodeState { step: horizon, value })] = 1.0;
        }
    }
    for step in (0..horizon).rev() {
        for value in 0..t.modulus {
            let st = EpisodeState { step, value };
            let id = task.state_id(st);
            let dist = params.distribution(id, temperature)?;
            let mut total = 0.0;
            for (a, p) in dist.probs().iter().enumerate() {
                let next = task.state_id(task.step(st, a)?);
                after[id * vocab + a] = at[next];
                total += p * at[next];
            }
            at[id] = total;
        }
    }
    Ok(PolicySuccess { vocab_size: vocab, after, at })
}

// ---------------------------------------------------------------------------
// Task families
// ---------------------------------------------------------------------------

/// Parameters of a seeded ForkArith family. All instances share modulus,
/// horizon, ops and target; they differ in start value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyConfig {
    pub modulus: u64,
    pub horizon: usize,
    pub ops: Vec<Op>,
    /// Inclusive band of acceptable random-policy success fractions.
    pub min_success: f64,
    pub max_success: f64,
    /// Fraction of instances held out for evaluation.
    pub holdout_fraction: f64,
    /// Fixed target; sampled from the seed when absent.
    pub target: Option<u64>,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            modulus: 23,
            horizon: 8,
            ops: default_ops(),
            min_success: 0.01,
            max_success: 0.10,
            holdout_fraction: 0.0,
            target: None,
        }
    }
}

pub fn default_ops() -> Vec<Op> {
    vec![
        Op::Add { c: 1 },
        Op::Add { c: 2 },
        Op::Add { c: 5 },
        Op::Mul { c: 2 },
        Op::Mul { c: 3 },
        Op::Noop,
    ]
}

/// Generated train and evaluation instances of one family.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSet {
    pub train: Vec<Task>,
    pub eval: Vec<Task>,
}

/// Random-policy success fraction for every (start, target) pair, computed
/// by a forward count over values.
fn success_fractions(cfg: &FamilyConfig) -> Vec<Vec<f64>> {
    let m = cfg.modulus as usize;
    let total = (cfg.ops.len() as f64).powi(cfg.horizon as i32);
    (0..m)
        .map(|start| {
            let mut counts = vec![0f64; m];
            counts[start] = 1.0;
            for _ in 0..cfg.horizon {
                let mut next = vec![0f64; m];
                for (v, &c) in counts.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    for op in &cfg.ops {
                        next[op.apply(v as u64, cfg.modulus) as usize] += c;
                    }
                }
                counts = next;
            }
            counts.iter().map(|c| c / total).collect()
        })
        .collect()
}

/// Builds a reproducible family from `seed`.
///
/// The target is drawn uniformly among values for which at least one start
/// lands in the success band; instances are every start in the band.
pub fn generate_family(cfg: &FamilyConfig, seed: u64) -> Result<TaskSet> {
    if cfg.modulus < 2 || cfg.horizon == 0 || cfg.ops.len() < 2 {
        return Err(LabError::Config("degenerate task family".into()));
    }
    if !(0.0..1.0).contains(&cfg.holdout_fraction) {
        return Err(LabError::Config("holdout_fraction must lie in [0, 1)".into()));
    }
    let fractions = success_fractions(cfg);
    let in_band = |f: f64| f >= cfg.min_success && f <= cfg.max_success;
    let starts_for = |target: usize| -> Vec<u64> {
        (0..cfg.modulus as usize)
            .filter(|&s| in_band(fractions[s][target]))
            .map(|s| s as u64)
            .collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7461_736b_6661_6d31);
    let target = match cfg.target {
        Some(t) if t < cfg.modulus => t,
        Some(t) => return Err(LabError::Config(format!("target {t} outside modulus"))),
        None => {
            let candidates: Vec<u64> = (0..cfg.modulus)
                .filter(|&t| !starts_for(t as usize).is_empty())
                .collect();
            *candidates.choose(&mut rng).ok_or_else(|| {
                LabError::Config("no target yields a success fraction inside the band".into())
            })?
        }
    };
    let mut starts = starts_for(target as usize);
    if starts.is_empty() {
        return Err(LabError::Config(format!("target {target} has no start inside the band")));
    }
    starts.shuffle(&mut rng);
    let n_eval = ((starts.len() as f64) * cfg.holdout_fraction).floor() as usize;
    let n_eval = n_eval.min(starts.len() - 1);
    let make = |s: &[u64]| -> Result<Vec<Task>> {
        let mut s = s.to_vec();
        s.sort_unstable();
        s.into_iter()
            .map(|start| {
                ForkArithTask::new(start, target, cfg.modulus, cfg.horizon, cfg.ops.clone())
                    .map(Task::ForkArith)
            })
            .collect()
    };
    let train = make(&starts[n_eval..])?;
    let eval = if n_eval == 0 { train.clone() } else { make(&starts[..n_eval])? };
    Ok(TaskSet { train, eval })
}

/// Draws a uniformly random task index.
pub fn pick_task<R: Rng>(tasks: &[Task], rng: &mut R) -> usize {
    rng.gen_range(0..tasks.len())
}

// ---------------------------------------------------------------------------
// Task files
// ---------------------------------------------------------------------------

/// JSON layout of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<u64>,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ops: Vec<Op>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab_size: Option<usize>,
}

impl From<&Task> for TaskRecord {
    fn from(task: &Task) -> Self {
        match task {
            Task::ForkArith(t) => TaskRecord {
                kind: "fork_arith".into(),
                start: Some(t.start),
                target: Some(t.target),
                modulus: Some(t.modulus),
                horizon: t.horizon,
                ops: t.ops.clone(),
                required: None,
                vocab_size: None,
            },
            Task::Constant(t) => TaskRecord {
                kind: "constant".into(),
                start: None,
                target: None,
                modulus: None,
                horizon: t.required.len(),
                ops: Vec::new(),
                required: Some(t.required.clone()),
                vocab_size: Some(t.vocab_size),
            },
        }
    }
}

impl TryFrom<TaskRecord> for Task {
    type Error = LabError;

    fn try_from(rec: TaskRecord) -> Result<Self> {
        let missing = |f: &str| LabError::Config(format!("task of kind {} is missing {f}", rec.kind));
        match rec.kind.as_str() {
            "fork_arith" => Ok(Task::ForkArith(ForkArithTask::new(
                rec.start.ok_or_else(|| missing("start"))?,
                rec.target.ok_or_else(|| missing("target"))?,
                rec.modulus.ok_or_else(|| missing("modulus"))?,
                rec.horizon,
                rec.ops.clone(),
            )?)),
            "constant" => {
                let required = rec.required.clone().ok_or_else(|| missing("required"))?;
                if required.len() != rec.horizon {
                    return Err(LabError::Length { expected: rec.horizon, got: required.len() });
                }
                Ok(Task::Constant(ConstantTask::new(
                    required,
                    rec.vocab_size.ok_or_else(|| missing("vocab_size"))?,
                )?))
            }
            other => Err(LabError::Config(format!("unknown task kind {other:?}"))),
        }
    }
}

/// Accepts either one task object or an array of them.
pub fn tasks_from_json(text: &str) -> Result<Vec<Task>> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| LabError::Parse { line: e.line(), message: e.to_string() })?;
    let records: Vec<TaskRecord> = match value {
        serde_json::Value::Array(_) => serde_json::from_value(value),
        _ => serde_json::from_value(value).map(|r| vec![r]),
    }
    .map_err(|e| LabError::Config(e.to_string()))?;
    if records.is_empty() {
        return Err(LabError::EmptyInput("task file holds no tasks".into()));
    }
    records.into_iter().map(Task::try_from).collect()
}

pub fn tasks_to_json(tasks: &[Task]) -> String {
    let records: Vec<TaskRecord> = tasks.iter().map(TaskRecord::from).collect();
    serde_json::to_string_pretty(&records).expect("task serialization")
}
