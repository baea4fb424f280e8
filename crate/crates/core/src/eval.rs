//! Offline evaluation: per-signal NDCG, predicted satisfaction, ground-truth
//! retention, and the α sensitivity analysis.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fusion::{ActionSpace, RankedList};
use crate::policy::{forward, greedy_action, ActionMode, PolicyParams};
use crate::reward::{engagement_reward, format_action_reward, format_relevance_reward, RewardBreakdown, RewardConfig};
use crate::rng::SeededRng;
use crate::satisfaction::{gap_score, list_features, predict_satisfaction, satisfaction_reward, RewardModelParams, SatConfig};
use crate::simenv::{QueryContext, SyntheticEnv};
use crate::types::{FusionAction, QueryEpisode};

fn dcg(gains_in_order: impl Iterator<Item = f64>, cutoff: usize) -> f64 {
    gains_in_order
        .take(cutoff)
        .enumerate()
        .map(|(p, g)| g / ((p + 2) as f64).log2())
        .sum()
}

/// NDCG at `cutoff` with a `1/log2(position + 1)` discount (1-based
/// positions). `gains` is indexed by candidate. Zero when no item has gain.
pub fn ndcg_at(list: &RankedList, gains: &[f64], cutoff: usize) -> Result<f64> {
    check_dim("ndcg gains", list.len(), gains.len())?;
    if cutoff == 0 {
        return Err(Error::invalid("ndcg cutoff", cutoff, ">= 1"));
    }
    let mut ideal = gains.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(ideal.into_iter(), cutoff);
    if idcg <= 0.0 {
        return Ok(0.0);
    }
    Ok(dcg(list.order.iter().map(|&i| gains[i]), cutoff) / idcg)
}

/// Anything that maps a query state to a fusion action.
pub trait ActionSelector: Sync {
    fn select(&self, state_features: &[f64]) -> Result<FusionAction>;
}

/// The same weights for every query.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedWeights(pub FusionAction);

impl FixedWeights {
    /// The grid action nearest to equal weights `1/k`.
    pub fn uniform(space: &ActionSpace) -> Result<Self> {
        let k = space.tasks();
        Ok(Self(space.nearest(&vec![1.0 / k as f64; k])?))
    }
}

impl ActionSelector for FixedWeights {
    fn select(&self, _: &[f64]) -> Result<FusionAction> {
        Ok(self.0.clone())
    }
}

/// Mode of a trained policy.
#[derive(Debug, Clone)]
pub struct GreedyPolicy<'a> {
    pub params: &'a PolicyParams,
    pub space: &'a ActionSpace,
    pub mode: &'a ActionMode,
}

impl ActionSelector for GreedyPolicy<'_> {
    fn select(&self, state_features: &[f64]) -> Result<FusionAction> {
        greedy_action(&forward(self.params, state_features)?, self.space, self.mode)
    }
}

/// What evaluation needs besides the policy.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub env: &'a SyntheticEnv,
    pub reward_model: &'a RewardModelParams,
    pub sat: &'a SatConfig,
    pub reward: &'a RewardConfig,
}

/// Per-query evaluation record.
#[derive(Debug, Clone, Copy, PartialEq)]
struct QueryMetrics {
    ndcg: [f64; 4],
    rewards: RewardBreakdown,
    true_satisfaction: f64,
    retention_probability: f64,
    reformulated: f64,
    utility: f64,
}

/// Metric name → value. Keys are stable; see [`METRIC_KEYS`].
pub type MetricReport = BTreeMap<String, f64>;

pub const METRIC_KEYS: [&str; 14] = [
    "composite_reward",
    "engagement_reward",
    "format_action_penalty",
    "format_relevance_penalty",
    "ndcg_average",
    "ndcg_click",
    "ndcg_duration",
    "ndcg_long_play",
    "ndcg_relevance",
    "reformulation_rate",
    "retention_probability",
    "satisfaction_score",
    "true_satisfaction",
    "utility",
];

fn evaluate_query(ctx: &QueryContext, action: &FusionAction, ec: &EvalContext, rng: &mut SeededRng) -> Result<QueryMetrics> {
    let env = ec.env;
    let list = env.rank(ctx, action)?;
    let feedback = env.realize_feedback(ctx, &list, rng)?;
    let outcome = env.realize_outcomes(ctx, &list, &feedback, rng)?;
    let cutoff = ec.reward.ndcg_cutoff;
    let signal = |f: &dyn Fn(usize) -> f64| -> Result<f64> {
        let gains: Vec<f64> = (0..feedback.len()).map(f).collect();
        ndcg_at(&list, &gains, cutoff)
    };
    let bit = |b: bool| if b { 1.0 } else { 0.0 };
    let ndcg = [
        signal(&|i| bit(feedback[i].click))?,
        signal(&|i| bit(feedback[i].long_play))?,
        signal(&|i| feedback[i].duration)?,
        signal(&|i| feedback[i].relevance_label)?,
    ];
    let relevance: Vec<f64> = ctx.candidates.iter().map(|c| c.relevance).collect();
    let rewards = RewardBreakdown {
        engagement: engagement_reward(&list, &feedback, ec.reward)?,
        satisfaction: predict_satisfaction(ec.reward_model, &ctx.state_features, &list_features(&ctx.candidates, &list))?,
        format_action: format_action_reward(action, ec.reward.xi),
        format_relevance: format_relevance_reward(&list, &relevance, ec.reward.relevance_threshold, ec.reward.relevance_top_k),
    };
    let true_satisfaction = satisfaction_reward(
        outcome.reformulated,
        outcome.session_gap,
        outcome.retained,
        env.user(ctx).gap_baseline,
        ec.sat,
    )?;
    Ok(QueryMetrics {
        ndcg,
        rewards,
        true_satisfaction,
        retention_probability: outcome.retention_probability,
        reformulated: bit(outcome.reformulated),
        utility: outcome.utility,
    })
}

/// Evaluates `selector` on `pool`. Query `q` draws its feedback from the
/// substream `eval/q` of `seed`, so two selectors that pick the same action
/// for a query see the same user reaction.
pub fn evaluate_policy(selector: &dyn ActionSelector, pool: &[QueryContext], ec: &EvalContext, seed: u64) -> Result<MetricReport> {
    if pool.is_empty() {
        return Err(Error::Empty("evaluation pool"));
    }
    let root = SeededRng::new(seed).split("eval");
    let per_query = pool
        .par_iter()
        .enumerate()
        .map(|(q, ctx)| {
            let action = selector.select(&ctx.state_features)?;
            evaluate_query(ctx, &action, ec, &mut root.split(&q.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(&per_query))
}

fn aggregate(rows: &[QueryMetrics]) -> MetricReport {
    let n = rows.len() as f64;
    let mean = |f: &dyn Fn(&QueryMetrics) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let ndcg: Vec<f64> = (0..4).map(|s| mean(&|r| r.ndcg[s])).collect();
    let entries = [
        ("composite_reward", mean(&|r| r.rewards.total())),
        ("engagement_reward", mean(&|r| r.rewards.engagement)),
        ("format_action_penalty", mean(&|r| r.rewards.format_action)),
        ("format_relevance_penalty", mean(&|r| r.rewards.format_relevance)),
        ("ndcg_average", ndcg.iter().sum::<f64>() / 4.0),
        ("ndcg_click", ndcg[0]),
        ("ndcg_duration", ndcg[2]),
        ("ndcg_long_play", ndcg[1]),
        ("ndcg_relevance", ndcg[3]),
        ("reformulation_rate", mean(&|r| r.reformulated)),
        ("retention_probability", mean(&|r| r.retention_probability)),
        ("satisfaction_score", mean(&|r| r.rewards.satisfaction)),
        ("true_satisfaction", mean(&|r| r.true_satisfaction)),
        ("utility", mean(&|r| r.utility)),
    ];
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Two-column text rendering of a report, names left-aligned.
pub fn format_report(report: &MetricReport) -> String {
    let width = report.keys().map(String::len).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in report {
        let _ = writeln!(out, "{k:<width$}  {v:>12.6}");
    }
    out
}

/// Pearson correlation, or `None` when either series has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_dim("pearson series", x.len(), y.len())?;
    if x.len() < 2 {
        return Err(Error::invalid("pearson series length", x.len(), ">= 2"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaPoint {
    pub alpha: f64,
    /// `ρ(r_sat, gap_score)`; `None` when undefined.
    pub rho_gap: Option<f64>,
    /// `ρ(r_sat, I_ret)`; `None` when undefined.
    pub rho_retention: Option<f64>,
    /// Sum of the defined correlations; `None` if either is undefined.
    pub composite: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSensitivity {
    pub points: Vec<AlphaPoint>,
    /// α with the largest defined composite, first on ties.
    pub best_alpha: Option<f64>,
}

/// Correlates `r_sat` with its two ingredients across an α grid. `cfg`
/// supplies everything but α.
pub fn alpha_sensitivity(episodes: &[QueryEpisode], alphas: &[f64], cfg: &SatConfig) -> Result<AlphaSensitivity> {
    if episodes.len() < 2 {
        return Err(Error::invalid("alpha sensitivity episodes", episodes.len(), ">= 2"));
    }
    let gaps = episodes
        .iter()
        .map(|e| gap_score(e.session_gap, e.user_gap_baseline, cfg.delta, cfg.temperature))
        .collect::<Result<Vec<_>>>()?;
    let retained: Vec<f64> = episodes.iter().map(|e| if e.retained { 1.0 } else { 0.0 }).collect();
    let mut points = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid("alpha", alpha, "in [0, 1]"));
        }
        let sat_cfg = SatConfig { alpha, ..*cfg };
        let r = episodes
            .iter()
            .map(|e| satisfaction_reward(e.reformulated, e.session_gap, e.retained, e.user_gap_baseline, &sat_cfg))
            .collect::<Result<Vec<_>>>()?;
        let rho_gap = pearson(&r, &gaps)?;
        let rho_retention = pearson(&r, &retained)?;
        let composite = match (rho_gap, rho_retention) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        points.push(AlphaPoint {
            alpha,
            rho_gap,
            rho_retention,
            composite,
        });
    }
    let mut best: Option<(f64, f64)> = None;
    for p in &points {
        if let Some(c) = p.composite {
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((p.alpha, c));
            }
        }
    }
    Ok(AlphaSensitivity {
        points,
        best_alpha: best.map(|(a, _)| a),
    })
}
