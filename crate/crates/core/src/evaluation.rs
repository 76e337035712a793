//! Pass@k and Avg@k estimation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::Task;
use crate::error::{LabError, Result};
use crate::policy::PolicyParams;
use crate::trainer::rollout_group;

/// Unbiased estimate of the probability that `k` of `n` samples, `c` of them
/// correct, include at least one correct sample.
///
/// Uses `C(n-c, k) / C(n, k) = prod_{i=n-c+1}^{n} (1 - k/i)`.
pub fn pass_at_k(n: usize, c: usize, k: usize) -> Result<f64> {
    if k == 0 || k > n {
        return Err(LabError::Range(format!("k={k} must lie in [1, n={n}]")));
    }
    if c > n {
        return Err(LabError::Range(format!("c={c} exceeds n={n}")));
    }
    if c == 0 {
        return Ok(0.0);
    }
    if n - c < k {
        return Ok(1.0);
    }
    if k == 1 {
        return Ok(avg_at_k(n, c));
    }
    let mut miss = 1.0;
    for i in (n - c + 1)..=n {
        miss *= 1.0 - k as f64 / i as f64;
    }
    Ok(1.0 - miss)
}

/// Mean per-sample correctness.
pub fn avg_at_k(n: usize, c: usize) -> f64 {
    c as f64 / n as f64
}

/// Sampling settings for evaluation rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Decoding {
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for Decoding {
    fn default() -> Self {
        Self { temperature: 0.6, top_p: 0.95 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: usize,
    pub n: usize,
    pub c: usize,
}

/// Task-averaged estimates at one `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KPoint {
    pub k: usize,
    pub pass_at_k: f64,
    pub avg_at_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task_set: String,
    pub decoding: Decoding,
    pub seed: u64,
    pub per_task: Vec<TaskResult>,
    pub curve: Vec<KPoint>,
}

impl EvalReport {
    /// Builds the per-k curve from per-task counts.
    pub fn from_counts(
        task_set: &str,
        decoding: Decoding,
        seed: u64,
        per_task: Vec<TaskResult>,
        ks: &[usize],
    ) -> Result<Self> {
        if per_task.is_empty() {
            return Err(LabError::EmptyInput("no tasks to evaluate".into()));
        }
        let m = per_task.len() as f64;
        let mut curve = Vec::with_capacity(ks.len());
        for &k in ks {
            let mut pass = 0.0;
            let mut avg = 0.0;
            for r in &per_task {
                pass += pass_at_k(r.n, r.c, k)?;
                avg += avg_at_k(r.n, r.c);
            }
            curve.push(KPoint { k, pass_at_k: pass / m, avg_at_k: avg / m });
        }
        Ok(Self { task_set: task_set.to_string(), decoding, seed, per_task, curve })
    }

    pub fn at(&self, k: usize) -> Option<KPoint> {
        self.curve.iter().copied().find(|p| p.k == k)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("task_set,k,pass_at_k,avg_at_k\n");
        for p in &self.curve {
            out.push_str(&format!("{},{},{},{}\n", self.task_set, p.k, p.pass_at_k, p.avg_at_k));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Powers of two up to `n`.
pub fn k_grid(n: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |k| k.checked_mul(2)).take_while(|&k| k <= n).collect()
}

/// Samples `n` trajectories per task and aggregates Pass@k and Avg@k.
pub fn evaluate(
    params: &PolicyParams,
    tasks: &[Task],
    n: usize,
    ks: &[usize],
    decoding: Decoding,
    seed: u64,
) -> Result<EvalReport> {
    evaluate_named("eval", params, tasks, n, ks, decoding, seed)
}

pub fn evaluate_named(
    task_set: &str,
    params: &PolicyParams,
    tasks: &[Task],
    n: usize,
    ks: &[usize],
    decoding: Decoding,
    seed: u64,
) -> Result<EvalReport> {
    if tasks.is_empty() {
        return Err(LabError::EmptyInput("empty task set".into()));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > n) {
        return Err(LabError::Range(format!("k={k} must lie in [1, n={n}]")));
    }
    let per_task: Result<Vec<TaskResult>> = tasks
        .par_iter()
        .enumerate()
        .map(|(i, task)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let trajs = rollout_group(params, task, n, decoding.temperature, decoding.top_p, &mut rng)?;
            Ok(TaskResult { task: i, n, c: trajs.iter().filter(|t| t.reward > 0).count() })
        })
        .collect();
    EvalReport::from_counts(task_set, decoding, seed, per_task?, ks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{enumerate_solutions, ConstantTask, ForkArithTask, Op};
    use proptest::prelude::*;

    /// Fraction of k-subsets of n samples (the first c correct) containing a
    /// correct one, by enumeration of bitmasks.
    fn enumerate_subsets(n: usize, c: usize, k: usize) -> f64 {
        let (mut hit, mut total) = (0u64, 0u64);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != k {
                continue;
            }
            total += 1;
            if mask & ((1u32 << c) - 1) != 0 {
                hit += 1;
            }
        }
        hit as f64 / total as f64
    }

    #[test]
    fn matches_subset_enumeration() {
        for n in 1..=12 {
            for c in 0..=n {
                for k in 1..=n {
                    let got = pass_at_k(n, c, k).unwrap();
                    let want = enumerate_subsets(n, c, k);
                    assert!((got - want).abs() < 1e-12, "n={n} c={c} k={k}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn examples() {
        assert!((pass_at_k(4, 2, 2).unwrap() - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(pass_at_k(10, 0, 3).unwrap(), 0.0);
        assert_eq!(pass_at_k(10, 1, 10).unwrap(), 1.0);
        assert_eq!(avg_at_k(32, 16), 0.5);
        assert_eq!(avg_at_k(7, 7), 1.0);
        assert!(matches!(pass_at_k(4, 1, 5), Err(LabError::Range(_))));
    }

    #[test]
    fn large_n_is_finite() {
        let p = pass_at_k(256, 3, 128).unwrap();
        // 1 - (128*127*126)/(256*255*254)
        let want = 1.0 - (128.0 * 127.0 * 126.0) / (256.0 * 255.0 * 254.0);
        assert!((p - want).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn avg_equals_pass_at_one(n in 1usize..300, frac in 0.0f64..=1.0) {
            let c = ((n as f64) * frac).floor() as usize;
            prop_assert_eq!(avg_at_k(n, c), pass_at_k(n, c, 1).unwrap());
        }

        #[test]
        fn monotone_in_k_and_c(n in 2usize..64, c in 0usize..64, k in 1usize..63) {
            let c = c.min(n);
            let k = k.min(n - 1);
            prop_assert!(pass_at_k(n, c, k + 1).unwrap() >= pass_at_k(n, c, k).unwrap() - 1e-15);
            if c < n {
                prop_assert!(pass_at_k(n, c + 1, k).unwrap() >= pass_at_k(n, c, k).unwrap() - 1e-15);
            }
        }
    }

    #[test]
    fn uniform_policy_matches_enumeration() {
        let task = Task::ForkArith(
            ForkArithTask::new(1, 4, 7, 3, vec![Op::Add { c: 1 }, Op::Add { c: 2 }, Op::Mul { c: 2 }, Op::Noop])
                .unwrap(),
        );
        let p = enumerate_solutions(&task).unwrap().success_fraction();
        let params = PolicyParams::zeros(task.state_count(), 4).unwrap();
        let n = 4000;
        let r = evaluate(&params, &[task], n, &[1], Decoding { temperature: 1.0, top_p: 1.0 }, 3).unwrap();
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((r.curve[0].avg_at_k - p).abs() <= 3.0 * sd);
    }

    #[test]
    fn converged_constant_policy_passes_everything() {
        let task = Task::Constant(ConstantTask::new(vec![2, 0], 3).unwrap());
        let mut params = PolicyParams::zeros(3, 3).unwrap();
        params.set(0, 2, 50.0);
        params.set(1, 0, 50.0);
        let before = params.clone();
        let r = evaluate(&params, &[task], 16, &k_grid(16), Decoding::default(), 0).unwrap();
        assert!(r.curve.iter().all(|p| p.pass_at_k == 1.0));
        assert_eq!(params, before);
        assert!(r.curve.windows(2).all(|w| w[1].pass_at_k >= w[0].pass_at_k));
    }

    #[test]
    fn empty_and_bad_k() {
        let params = PolicyParams::zeros(3, 3).unwrap();
        assert!(matches!(evaluate(&params, &[], 4, &[1], Decoding::default(), 0), Err(LabError::EmptyInput(_))));
        let task = Task::Constant(ConstantTask::new(vec![2, 0], 3).unwrap());
        assert!(matches!(evaluate(&params, &[task], 4, &[8], Decoding::default(), 0), Err(LabError::Range(_))));
    }

    #[test]
    fn csv_layout() {
        let r = EvalReport::from_counts("train", Decoding::default(), 0, vec![TaskResult { task: 0, n: 4, c: 2 }], &[1, 2])
            .unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("task_set,k,pass_at_k,avg_at_k\ntrain,1,0.5,0.5\n"));
    }
}
