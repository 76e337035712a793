//! Entropy/polarity analysis of rollout logs.

use serde::{Deserialize, Serialize};

use crate::credit::{credit_score, group_advantage, quadrant_label, shape_advantage, Quadrant};
use crate::error::{LabError, Result};
use crate::infotheory::{entropy_histograms, proxy_cmi};
use crate::trainer::ShapedRecord;

use super::rollout_log::LogGroup;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeOptions {
    pub alpha: f64,
    pub phi: f64,
    pub bins: usize,
    /// Upper end of the entropy bins. Defaults to `ln(vocab_size)` when the
    /// vocabulary is known, otherwise to the largest observed entropy.
    pub range_max: Option<f64>,
    pub vocab_size: Option<usize>,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self { alpha: 0.2, phi: 2.0, bins: 32, range_max: None, vocab_size: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolaritySummary {
    pub tokens: usize,
    pub mean_entropy: f64,
    /// Share of this polarity's tokens above the overall mean entropy.
    pub frac_above_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisBundle {
    pub options: AnalyzeOptions,
    pub groups: usize,
    pub tokens: usize,
    /// Groups whose rewards all agree; they get no shaped advantages.
    pub zero_variance_groups: usize,
    /// Token shares indexed by [`Quadrant::index`].
    pub quadrant_shares: [f64; 4],
    pub proxy_cmi: f64,
    pub range_max: f64,
    pub bin_edges: Vec<f64>,
    pub counts_pos: Vec<u64>,
    pub counts_neg: Vec<u64>,
    pub positive: PolaritySummary,
    pub negative: PolaritySummary,
    pub logp_old_available: bool,
    pub mean_logp_old: Option<f64>,
    pub shaped: Vec<ShapedRecord>,
}

impl AnalysisBundle {
    pub fn share(&self, q: Quadrant) -> f64 {
        self.quadrant_shares[q.index()]
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count_pos,count_neg\n");
        for i in 0..self.counts_pos.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.bin_edges[i], self.bin_edges[i + 1], self.counts_pos[i], self.counts_neg[i]
            ));
        }
        out
    }

    pub fn quadrant_csv(&self) -> String {
        let mut out = String::from("quadrant,share\n");
        for q in Quadrant::ALL {
            out.push_str(&format!("{},{}\n", q, self.share(q)));
        }
        out
    }
}

fn polarity(tokens: &[(f64, i8)], positive: bool, mean: f64) -> PolaritySummary {
    let hs: Vec<f64> = tokens.iter().filter(|t| (t.1 > 0) == positive).map(|t| t.0).collect();
    let n = hs.len();
    PolaritySummary {
        tokens: n,
        mean_entropy: if n == 0 { 0.0 } else { hs.iter().sum::<f64>() / n as f64 },
        frac_above_mean: if n == 0 { 0.0 } else { hs.iter().filter(|&&h| h > mean).count() as f64 / n as f64 },
    }
}

pub fn analyze(groups: &[LogGroup], options: AnalyzeOptions) -> Result<AnalysisBundle> {
    if groups.is_empty() {
        return Err(LabError::EmptyInput("no groups to analyze".into()));
    }
    if !(0.0..=1.0).contains(&options.alpha) || !(options.phi > 0.0) {
        return Err(LabError::Config(format!("alpha {} / phi {} out of range", options.alpha, options.phi)));
    }
    let tokens: Vec<(f64, i8)> =
        groups.iter().flat_map(|g| g.records.iter().map(|r| (r.entropy, r.reward))).collect();

    let mut counts = [0usize; 4];
    let mut shaped = Vec::new();
    let mut zero_variance = 0;
    for g in groups {
        for r in &g.records {
            counts[quadrant_label(r.entropy, g.stats.mu, r.reward).index()] += 1;
        }
        let trajs = g.trajectory_rewards();
        let rewards: Vec<i8> = trajs.iter().map(|t| t.1).collect();
        let adv = match group_advantage(&rewards) {
            Ok(a) => a,
            Err(LabError::ZeroVarianceGroup { .. }) | Err(LabError::Config(_)) => {
                zero_variance += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        for r in &g.records {
            let pos = trajs.iter().position(|t| t.0 == r.traj).expect("trajectory indexed");
            let base = adv.advantages[pos];
            let credit = credit_score(r.entropy, g.stats, base, options.phi);
            shaped.push(ShapedRecord {
                query_id: g.query_id.clone(),
                traj: r.traj,
                t: r.t,
                entropy: r.entropy,
                base,
                credit,
                shaped: shape_advantage(base, credit, options.alpha),
                quadrant: quadrant_label(r.entropy, g.stats.mu, r.reward),
            });
        }
    }
    let n = tokens.len() as f64;

    let range_max = match (options.range_max, options.vocab_size) {
        (Some(r), _) => r,
        (None, Some(v)) if v >= 2 => (v as f64).ln(),
        _ => {
            let m = tokens.iter().map(|t| t.0).fold(0.0, f64::max);
            if m > 0.0 {
                m
            } else {
                1.0
            }
        }
    };
    let hist = entropy_histograms(&tokens, options.bins, range_max)?;
    let entropies: Vec<f64> = tokens.iter().map(|t| t.0).collect();
    let rewards: Vec<i8> = tokens.iter().map(|t| t.1).collect();
    let proxy = proxy_cmi(&entropies, &rewards, options.bins, range_max)?;

    let logps: Vec<f64> = groups.iter().flat_map(|g| g.records.iter().filter_map(|r| r.logp_old)).collect();
    let logp_old_available = logps.len() == tokens.len();

    Ok(AnalysisBundle {
        options,
        groups: groups.len(),
        tokens: tokens.len(),
        zero_variance_groups: zero_variance,
        quadrant_shares: counts.map(|c| c as f64 / n),
        proxy_cmi: proxy,
        range_max,
        bin_edges: hist.bin_edges,
        counts_pos: hist.counts_pos,
        counts_neg: hist.counts_neg,
        positive: polarity(&tokens, true, hist.mean_entropy),
        negative: polarity(&tokens, false, hist.mean_entropy),
        logp_old_available,
        mean_logp_old: logp_old_available.then(|| logps.iter().sum::<f64>() / logps.len() as f64),
        shaped,
    })
}
