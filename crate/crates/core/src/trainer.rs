//! Rollouts, dynamic sampling, and the mini-batch optimisation loop.
//!
//! One training step:
//!
//! 1. snapshot the parameters,
//! 2. sample `queries_per_step` groups of `group_size` trajectories, each
//!    query on its own seeded substream,
//! 3. drop zero-variance groups,
//! 4. compute group advantages, entropy statistics and per-token shaping,
//! 5. split retained trajectories into mini-batches and apply one gradient
//!    update per mini-batch, each normalised by its own token count.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::credit::{
    baseline_shaping, entropy_stats, group_advantage, EntropyStats, Mode, Quadrant, QuadrantSet,
    ShapingParams, TokenCredit, ZERO_VARIANCE_STD,
};
use crate::env::{generate_family, policy_success, FamilyConfig, Task, TaskSet};
use crate::error::{LabError, Result};
use crate::infotheory::{credit_bound_holds, cmi_direct, proxy_cmi, DiscreteJoint};
use crate::objective::{
    analytic_gradients, batch_loss, Batch, BatchToken, ClipConfig, ObjectiveConfig,
};
use crate::policy::{PolicyParams, PolicySnapshot};

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub mode: Mode,
    pub group_size: usize,
    pub queries_per_step: usize,
    /// Trajectories per gradient update.
    pub ppo_mini_batch: usize,
    pub lr: f64,
    pub alpha: f64,
    pub phi: f64,
    pub eps_low: f64,
    pub eps_high: f64,
    pub temperature: f64,
    pub top_p: f64,
    pub total_steps: usize,
    pub seed: u64,
    /// Standard deviation of the initial logits; zero is the uniform policy.
    pub init_scale: f64,
    pub entropy_coef: f64,
    pub positive_weight: f64,
    pub forking_fraction: f64,
    pub proxy_bins: usize,
    /// Track the exact token/reward information on every step (enumerable
    /// tasks only).
    pub exact_cmi: bool,
    pub family: FamilyConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Grpo,
            group_size: 8,
            queries_per_step: 64,
            ppo_mini_batch: 64,
            lr: 1.0,
            alpha: 0.2,
            phi: 2.0,
            eps_low: 0.20,
            eps_high: 0.28,
            temperature: 1.0,
            top_p: 0.95,
            total_steps: 300,
            seed: 0,
            init_scale: 0.0,
            entropy_coef: 0.001,
            positive_weight: 0.1,
            forking_fraction: 0.2,
            proxy_bins: 32,
            exact_cmi: true,
            family: FamilyConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LabError::Config(msg));
        if self.group_size < 2 {
            return bad(format!("group_size must be >= 2, got {}", self.group_size));
        }
        if self.queries_per_step == 0 || self.ppo_mini_batch == 0 {
            return bad("queries_per_step and ppo_mini_batch must be positive".into());
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.phi > 0.0) {
            return bad(format!("phi must be positive, got {}", self.phi));
        }
        ClipConfig::new(self.eps_low, self.eps_high)?;
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad(format!("top_p must lie in (0, 1], got {}", self.top_p));
        }
        if self.proxy_bins < 2 {
            return bad("proxy_bins must be >= 2".into());
        }
        if !(self.init_scale >= 0.0) {
            return bad("init_scale must be non-negative".into());
        }
        Ok(())
    }

    pub fn objective(&self, entropy_bonus: f64) -> ObjectiveConfig {
        ObjectiveConfig {
            clip: ClipConfig { eps_low: self.eps_low, eps_high: self.eps_high },
            temperature: self.temperature,
            entropy_bonus,
        }
    }

    pub fn shaping(&self) -> ShapingParams {
        ShapingParams {
            alpha: self.alpha,
            phi: self.phi,
            positive_weight: self.positive_weight,
            forking_fraction: self.forking_fraction,
            entropy_coef: self.entropy_coef,
        }
    }
}

/// One emitted token of a rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenStep {
    pub state: usize,
    pub token: usize,
    /// Full-softmax log-probability under the snapshot.
    pub logp_old: f64,
    /// Full-softmax entropy at the state, in nats.
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TokenStep>,
    pub reward: i8,
}

impl Trajectory {
    pub fn mean_entropy(&self) -> f64 {
        self.steps.iter().map(|s| s.entropy).sum::<f64>() / self.steps.len() as f64
    }
}

/// Rollouts for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub query_id: String,
    pub task_index: usize,
    pub trajectories: Vec<Trajectory>,
}

impl Group {
    pub fn rewards(&self) -> Vec<i8> {
        self.trajectories.iter().map(|t| t.reward).collect()
    }

    pub fn reward_std(&self) -> f64 {
        let r: Vec<f64> = self.trajectories.iter().map(|t| f64::from(t.reward)).collect();
        let n = r.len() as f64;
        let mean = r.iter().sum::<f64>() / n;
        (r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
    }

    pub fn is_zero_variance(&self) -> bool {
        self.reward_std() < ZERO_VARIANCE_STD
    }

    pub fn entropies(&self) -> Vec<f64> {
        self.trajectories
            .iter()
            .flat_map(|t| t.steps.iter().map(|s| s.entropy))
            .collect()
    }
}

/// Groups generated from one snapshot.
#[derive(Debug, Clone)]
pub struct RolloutBatch {
    pub step: usize,
    pub snapshot: PolicySnapshot,
    pub groups: Vec<Group>,
}

/// Samples `group_size` trajectories for `task` from the snapshot.
pub fn rollout_group<R: Rng>(
    snapshot: &PolicyParams,
    task: &Task,
    group_size: usize,
    temperature: f64,
    top_p: f64,
    rng: &mut R,
) -> Result<Vec<Trajectory>> {
    let mut out = Vec::with_capacity(group_size);
    for _ in 0..group_size {
        let mut state = task.reset();
        let mut steps = Vec::with_capacity(task.horizon());
        let mut tokens = Vec::with_capacity(task.horizon());
        while state.step < task.horizon() {
            let sid = task.state_id(state);
            let dist = snapshot.distribution(sid, temperature)?;
            let token = dist.sample(top_p, rng);
            steps.push(TokenStep {
                state: sid,
                token,
                logp_old: snapshot.log_prob(sid, token, temperature)?,
                entropy: dist.entropy(),
            });
            tokens.push(token);
            state = task.step(state, token)?;
        }
        out.push(Trajectory { steps, reward: task.verify(&tokens)? });
    }
    Ok(out)
}

/// Independent stream for `(seed, step, query)`.
pub fn substream(seed: u64, step: u64, query: u64) -> ChaCha8Rng {
    let mut x = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [step, query] {
        x = splitmix(x ^ v.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    }
    ChaCha8Rng::seed_from_u64(x)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Groups with non-zero reward variance, plus the removed fraction.
pub fn dynamic_sampling_filter(groups: Vec<Group>, step: usize) -> Result<(Vec<Group>, f64)> {
    let input = groups.len();
    let kept: Vec<Group> = groups.into_iter().filter(|g| !g.is_zero_variance()).collect();
    let filtered = if input == 0 { 0.0 } else { (input - kept.len()) as f64 / input as f64 };
    if kept.is_empty() {
        return Err(LabError::StarvedBatch { step });
    }
    Ok((kept, filtered))
}

/// Telemetry for one step. `wall_time` is excluded from the metrics CSV so
/// that the CSV stays byte-identical across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: usize,
    pub skipped: bool,
    pub solve_rate: f64,
    pub mean_entropy: f64,
    /// Token shares by quadrant, indexed by [`Quadrant::index`].
    pub quadrant_shares: [f64; 4],
    pub loss_total: f64,
    pub quadrant_losses: [f64; 4],
    pub proxy_cmi: f64,
    /// Mean exact information between token and reward over retained tokens;
    /// NaN when not tracked.
    pub exact_cmi: f64,
    pub bound_violations: usize,
    pub filtered_fraction: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub clip_fraction: f64,
    pub updates: usize,
    pub wall_time: f64,
}

pub const METRICS_COLUMNS: [&str; 22] = [
    "step",
    "skipped",
    "solve_rate",
    "mean_entropy",
    "share_phr",
    "share_plr",
    "share_nlr",
    "share_nhr",
    "loss_total",
    "loss_phr",
    "loss_plr",
    "loss_nlr",
    "loss_nhr",
    "proxy_cmi",
    "exact_cmi",
    "bound_violations",
    "filtered_fraction",
    "ratio_min",
    "ratio_max",
    "clip_fraction",
    "updates",
    "quadrant_share_sum",
];

impl MetricsRow {
    pub fn csv_header() -> String {
        METRICS_COLUMNS.join(",")
    }

    pub fn csv_line(&self) -> String {
        let s = self.quadrant_shares;
        let l = self.quadrant_losses;
        let fields: Vec<String> = vec![
            self.step.to_string(),
            u8::from(self.skipped).to_string(),
            self.solve_rate.to_string(),
            self.mean_entropy.to_string(),
            s[0].to_string(),
            s[1].to_string(),
            s[2].to_string(),
            s[3].to_string(),
            self.loss_total.to_string(),
            l[0].to_string(),
            l[1].to_string(),
            l[2].to_string(),
            l[3].to_string(),
            self.proxy_cmi.to_string(),
            self.exact_cmi.to_string(),
            self.bound_violations.to_string(),
            self.filtered_fraction.to_string(),
            self.ratio_min.to_string(),
            self.ratio_max.to_string(),
            self.clip_fraction.to_string(),
            self.updates.to_string(),
            s.iter().sum::<f64>().to_string(),
        ];
        fields.join(",")
    }

    pub fn share(&self, q: Quadrant) -> f64 {
        self.quadrant_shares[q.index()]
    }
}

/// Per-token record of the shaping applied in one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapedRecord {
    pub query_id: String,
    pub traj: usize,
    pub t: usize,
    #[serde(rename = "H")]
    pub entropy: f64,
    pub base: f64,
    pub credit: f64,
    pub shaped: f64,
    pub quadrant: Quadrant,
}

/// Token stream in the rollout-log layout accepted by the analyser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutLogRecord {
    pub query_id: String,
    pub traj: usize,
    pub t: usize,
    pub entropy: f64,
    pub reward: i8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logp_old: Option<f64>,
}

/// Everything one step produced.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub metrics: MetricsRow,
    pub shaped: Vec<ShapedRecord>,
    pub rollout_log: Vec<RolloutLogRecord>,
    /// Retained tokens as fed to the first mini-batch loss.
    pub batch: Vec<BatchToken>,
}

/// Mutable training state.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub tasks: TaskSet,
    pub params: PolicyParams,
    pub step: usize,
    pub skipped_steps: usize,
}

impl Trainer {
    /// Builds the task family and initial parameters from the config seed.
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let tasks = generate_family(&config.family, config.seed)?;
        Self::with_tasks(config, tasks)
    }

    pub fn with_tasks(config: TrainConfig, tasks: TaskSet) -> Result<Self> {
        config.validate()?;
        let first = tasks
            .train
            .first()
            .ok_or_else(|| LabError::EmptyInput("no training tasks".into()))?;
        let (states, vocab) = (first.state_count(), first.vocab_size());
        if tasks.train.iter().chain(&tasks.eval).any(|t| t.state_count() != states || t.vocab_size() != vocab) {
            return Err(LabError::Shape("tasks disagree on state space".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x696e_6974);
        let params = PolicyParams::random_normal(states, vocab, config.init_scale, &mut rng)?;
        Ok(Self { config, tasks, params, step: 0, skipped_steps: 0 })
    }

    /// Rollouts for the current step from a fresh snapshot.
    pub fn rollouts(&self) -> Result<RolloutBatch> {
        let cfg = &self.config;
        let snapshot = self.params.snapshot();
        let groups: Result<Vec<Group>> = (0..cfg.queries_per_step)
            .into_par_iter()
            .map(|q| {
                let mut rng = substream(cfg.seed, self.step as u64, q as u64);
                let task_index = rng.gen_range(0..self.tasks.train.len());
                let trajectories = rollout_group(
                    &snapshot,
                    &self.tasks.train[task_index],
                    cfg.group_size,
                    cfg.temperature,
                    cfg.top_p,
                    &mut rng,
                )?;
                Ok(Group { query_id: format!("s{}-q{}", self.step, q), task_index, trajectories })
            })
            .collect();
        Ok(RolloutBatch { step: self.step, snapshot, groups: groups? })
    }

    /// Runs one step. Starved steps leave the parameters untouched and return
    /// a row flagged `skipped`.
    pub fn train_step(&mut self) -> Result<StepOutput> {
        let started = Instant::now();
        let cfg = self.config.clone();
        let rollout = self.rollouts()?;
        let step = self.step;
        self.step += 1;

        let all_traj: Vec<&Trajectory> = rollout.groups.iter().flat_map(|g| &g.trajectories).collect();
        let solve_rate =
            all_traj.iter().filter(|t| t.reward > 0).count() as f64 / all_traj.len() as f64;
        let mean_entropy =
            all_traj.iter().map(|t| t.mean_entropy()).sum::<f64>() / all_traj.len() as f64;

        let (groups, filtered_fraction) = match dynamic_sampling_filter(rollout.groups.clone(), step) {
            Ok(kept) => kept,
            Err(LabError::StarvedBatch { .. }) => {
                self.skipped_steps += 1;
                let shares = shares_of(&rollout.groups)?;
                return Ok(StepOutput {
                    metrics: MetricsRow {
                        step,
                        skipped: true,
                        solve_rate,
                        mean_entropy,
                        quadrant_shares: shares,
                        loss_total: 0.0,
                        quadrant_losses: [0.0; 4],
                        proxy_cmi: 0.0,
                        exact_cmi: f64::NAN,
                        bound_violations: 0,
                        filtered_fraction: 1.0,
                        ratio_min: 1.0,
                        ratio_max: 1.0,
                        clip_fraction: 0.0,
                        updates: 0,
                        wall_time: started.elapsed().as_secs_f64(),
                    },
                    shaped: Vec::new(),
                    rollout_log: Vec::new(),
                    batch: Vec::new(),
                });
            }
            Err(e) => return Err(e),
        };

        // Shaping over the whole retained batch.
        let mut stats: Vec<EntropyStats> = Vec::with_capacity(groups.len());
        let mut credits = Vec::new();
        for (gi, g) in groups.iter().enumerate() {
            let adv = group_advantage(&g.rewards())?;
            stats.push(entropy_stats(&g.entropies())?);
            for (ti, traj) in g.trajectories.iter().enumerate() {
                for s in &traj.steps {
                    credits.push(TokenCredit {
                        group: gi,
                        reward: traj.reward,
                        base: adv.advantages[ti],
                        entropy: s.entropy,
                    });
                }
            }
        }
        let shaping = baseline_shaping(cfg.mode, &credits, &stats, &cfg.shaping())?;

        let mut batch_tokens = Vec::with_capacity(credits.len());
        let mut shaped = Vec::with_capacity(credits.len());
        let mut log = Vec::with_capacity(credits.len());
        let mut traj_bounds = Vec::new();
        let mut k = 0;
        for g in &groups {
            for (ti, traj) in g.trajectories.iter().enumerate() {
                let begin = k;
                for (t, s) in traj.steps.iter().enumerate() {
                    let sh = shaping.tokens[k];
                    batch_tokens.push(BatchToken {
                        state: s.state,
                        token: s.token,
                        logp_old: s.logp_old,
                        advantage: sh.advantage,
                        quadrant: sh.shaped.quadrant,
                        mask: sh.mask,
                    });
                    shaped.push(ShapedRecord {
                        query_id: g.query_id.clone(),
                        traj: ti,
                        t,
                        entropy: s.entropy,
                        base: sh.shaped.base,
                        credit: sh.shaped.credit,
                        shaped: sh.shaped.shaped,
                        quadrant: sh.shaped.quadrant,
                    });
                    log.push(RolloutLogRecord {
                        query_id: g.query_id.clone(),
                        traj: ti,
                        t,
                        entropy: s.entropy,
                        reward: traj.reward,
                        logp_old: Some(s.logp_old),
                    });
                    k += 1;
                }
                traj_bounds.push((begin, k));
            }
        }

        let mut counts = [0usize; 4];
        for t in &batch_tokens {
            counts[t.quadrant.index()] += 1;
        }
        let n_tokens = batch_tokens.len() as f64;
        let quadrant_shares = counts.map(|c| c as f64 / n_tokens);

        let vocab = self.params.vocab_size();
        let entropies: Vec<f64> = shaped.iter().map(|r| r.entropy).collect();
        let rewards: Vec<i8> = log.iter().map(|r| r.reward).collect();
        let proxy = proxy_cmi(&entropies, &rewards, cfg.proxy_bins, (vocab as f64).ln())?;

        let (exact_cmi, bound_violations) = if cfg.exact_cmi {
            self.exact_information(&rollout.snapshot, &groups)?
        } else {
            (f64::NAN, 0)
        };

        // Mini-batch updates over whole trajectories.
        let objective = cfg.objective(shaping.entropy_bonus);
        let mut loss_total = 0.0;
        let mut quadrant_losses = [0.0; 4];
        let (mut rmin, mut rmax, mut clipped, mut selected) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
        let mut updates = 0;
        for chunk in traj_bounds.chunks(cfg.ppo_mini_batch) {
            let (lo, hi) = (chunk[0].0, chunk[chunk.len() - 1].1);
            let mb = Batch::new(batch_tokens[lo..hi].to_vec());
            let loss = batch_loss(&self.params, &mb, &objective, QuadrantSet::ALL)?;
            let grad = analytic_gradients(&self.params, &mb, &objective, QuadrantSet::ALL)?;
            self.params.apply_update(&grad, cfg.lr)?;
            loss_total += loss.total;
            for (acc, q) in quadrant_losses.iter_mut().zip(loss.per_quadrant) {
                *acc += q;
            }
            if loss.selected_count > 0 {
                rmin = rmin.min(loss.ratio.min);
                rmax = rmax.max(loss.ratio.max);
                clipped += loss.ratio.clip_fraction * loss.selected_count as f64;
                selected += loss.selected_count;
            }
            updates += 1;
        }
        let per = updates as f64;
        Ok(StepOutput {
            metrics: MetricsRow {
                step,
                skipped: false,
                solve_rate,
                mean_entropy,
                quadrant_shares,
                loss_total: loss_total / per,
                quadrant_losses: quadrant_losses.map(|q| q / per),
                proxy_cmi: proxy,
                exact_cmi,
                bound_violations,
                filtered_fraction,
                ratio_min: if selected > 0 { rmin } else { 1.0 },
                ratio_max: if selected > 0 { rmax } else { 1.0 },
                clip_fraction: if selected > 0 { clipped / selected as f64 } else { 0.0 },
                updates,
                wall_time: started.elapsed().as_secs_f64(),
            },
            shaped,
            rollout_log: log,
            batch: batch_tokens,
        })
    }

    /// Mean exact `I(token; reward | state)` over retained tokens under the
    /// snapshot, and the number of joints violating the entropy ceiling.
    fn exact_information(&self, snapshot: &PolicyParams, groups: &[Group]) -> Result<(f64, usize)> {
        let mut cache: Vec<Option<crate::env::PolicySuccess>> = vec![None; self.tasks.train.len()];
        let mut total = 0.0;
        let mut count = 0usize;
        let mut violations = 0;
        for g in groups {
            let task = &self.tasks.train[g.task_index];
            if !matches!(task, Task::ForkArith(_)) {
                return Ok((f64::NAN, 0));
            }
            if cache[g.task_index].is_none() {
                cache[g.task_index] = Some(policy_success(task, snapshot, self.config.temperature)?);
            }
            let success = cache[g.task_index].as_ref().expect("filled above");
            for traj in &g.trajectories {
                for s in &traj.steps {
                    let dist = snapshot.distribution(s.state, self.config.temperature)?;
                    let rows: Vec<[f64; 2]> = dist
                        .probs()
                        .iter()
                        .enumerate()
                        .map(|(a, &p)| {
                            let q = success.after(s.state, a);
                            [p * q, p * (1.0 - q)]
                        })
                        .collect();
                    let joint = DiscreteJoint::new(rows)?;
                    if !credit_bound_holds(&joint).holds {
                        violations += 1;
                    }
                    total += cmi_direct(&joint);
                    count += 1;
                }
            }
        }
        Ok((total / count as f64, violations))
    }
}

/// Quadrant shares over every token of `groups`, each group using its own
/// entropy mean.
fn shares_of(groups: &[Group]) -> Result<[f64; 4]> {
    let mut counts = [0usize; 4];
    for g in groups {
        let st = entropy_stats(&g.entropies())?;
        for traj in &g.trajectories {
            for s in &traj.steps {
                counts[crate::credit::quadrant_label(s.entropy, st.mu, traj.reward).index()] += 1;
            }
        }
    }
    let n: usize = counts.iter().sum();
    Ok(counts.map(|c| c as f64 / n as f64))
}

/// Final state and telemetry of an in-memory run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub params: PolicyParams,
    pub initial_params: PolicyParams,
    pub metrics: Vec<MetricsRow>,
    pub tasks: TaskSet,
    pub skipped_steps: usize,
}

/// Runs `total_steps` steps, calling `observe` after each one.
pub fn run_with<F>(config: &TrainConfig, mut observe: F) -> Result<RunOutput>
where
    F: FnMut(&Trainer, &StepOutput) -> Result<()>,
{
    let mut trainer = Trainer::new(config.clone())?;
    let initial_params = trainer.params.clone();
    let mut metrics = Vec::with_capacity(config.total_steps);
    for _ in 0..config.total_steps {
        let out = trainer.train_step()?;
        observe(&trainer, &out)?;
        metrics.push(out.metrics);
    }
    Ok(RunOutput {
        params: trainer.params,
        initial_params,
        metrics,
        tasks: trainer.tasks,
        skipped_steps: trainer.skipped_steps,
    })
}

pub fn run(config: &TrainConfig) -> Result<RunOutput> {
    run_with(config, |_, _| Ok(()))
}

/// Standard deviation of the initial logits in quadrant-isolation runs.
/// A uniform table ties every token with its group entropy mean, which
/// leaves the low-entropy quadrants empty.
pub const QUADRANT_INIT_SCALE: f64 = 1.0;

/// Default config with the loss restricted to one quadrant.
pub fn quadrant_isolation_config(quadrant: Quadrant, seed: u64) -> TrainConfig {
    TrainConfig {
        mode: Mode::Quadrants(QuadrantSet::only(quadrant)),
        seed,
        init_scale: QUADRANT_INIT_SCALE,
        exact_cmi: false,
        ..TrainConfig::default()
    }
}

/// Random-policy success fraction averaged over `tasks`, from the exact
/// recursion under the uniform policy.
pub fn random_policy_baseline(tasks: &[Task]) -> Result<f64> {
    if tasks.is_empty() {
        return Err(LabError::EmptyInput("no tasks".into()));
    }
    let mut total = 0.0;
    for t in tasks {
        let uniform = PolicyParams::zeros(t.state_count(), t.vocab_size())?;
        total += policy_success(t, &uniform, 1.0)?.at(t.state_id(t.reset()));
    }
    Ok(total / tasks.len() as f64)
}
