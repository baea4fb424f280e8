//! Dual-relative advantages, the clipped surrogate, and the training loop.
//!
//! Rewards for one iteration form a `B_q × G` matrix: `G` sampled actions for
//! each of `B_q` query states. The group advantage normalizes each row; the
//! batch shift `C^i` places a row's mean among all rows. Their sum keeps
//! within-query orderings intact while moving whole queries up or down.

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fusion::ActionSpace;
use crate::policy::{
    backprop_into, entropy_with, forward, forward_trace, log_prob_with, logit_gradient, sample_action_with, ActionMode,
    ForwardTrace, PolicyParams,
};
use crate::reward::RewardBreakdown;
use crate::rng::SeededRng;
use crate::types::FusionAction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageMode {
    /// Within-query normalization only.
    GroupOnly,
    #[default]
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DrpoConfig {
    /// Actions sampled per query, `G`.
    pub group_size: usize,
    /// Queries per iteration, `B_q`.
    pub batch_queries: usize,
    pub clip: f64,
    pub entropy_coef: f64,
    /// Surrogate epochs per sampled batch.
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub std_floor: f64,
    pub advantage_mode: AdvantageMode,
    pub iterations: usize,
}

impl Default for DrpoConfig {
    fn default() -> Self {
        Self {
            group_size: 32,
            batch_queries: 16,
            clip: 0.2,
            entropy_coef: 0.05,
            epochs: 4,
            learning_rate: 0.1,
            momentum: 0.0,
            std_floor: 1e-8,
            advantage_mode: AdvantageMode::Dual,
            iterations: 600,
        }
    }
}

impl DrpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::invalid("drpo.group_size", self.group_size, ">= 2"));
        }
        if self.batch_queries < 2 {
            return Err(Error::invalid("drpo.batch_queries", self.batch_queries, ">= 2"));
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(Error::invalid("drpo.clip", self.clip, "in (0, 1)"));
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return Err(Error::invalid("drpo.entropy_coef", self.entropy_coef, ">= 0"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("drpo.epochs", self.epochs, ">= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("drpo.learning_rate", self.learning_rate, "> 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("drpo.momentum", self.momentum, "in [0, 1)"));
        }
        if !(self.std_floor > 0.0) {
            return Err(Error::invalid("drpo.std_floor", self.std_floor, "> 0"));
        }
        Ok(())
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn check_finite(what: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("{what}[{i}] = {}", v[i]))),
        None => Ok(()),
    }
}

fn standardize(v: &[f64], floor: f64) -> (Vec<f64>, f64, f64) {
    let (mean, std) = mean_std(v);
    let out = if std < floor {
        vec![0.0; v.len()]
    } else {
        v.iter().map(|x| (x - mean) / std).collect()
    };
    (out, mean, std)
}

/// `(r_g − μ)/σ` with the population standard deviation; all zero when
/// `σ < std_floor`.
pub fn group_advantage(rewards: &[f64], std_floor: f64) -> Result<(Vec<f64>, f64, f64)> {
    if rewards.len() < 2 {
        return Err(Error::invalid("group size", rewards.len(), ">= 2"));
    }
    check_finite("rewards", rewards)?;
    Ok(standardize(rewards, std_floor))
}

/// `C^i = (μ^i − μ_batch)/σ_batch` over the group means; all zero when
/// `σ_batch < std_floor`.
pub fn batch_shift(group_means: &[f64], std_floor: f64) -> Result<(Vec<f64>, f64, f64)> {
    if group_means.len() < 2 {
        return Err(Error::invalid("batch size", group_means.len(), ">= 2"));
    }
    check_finite("group means", group_means)?;
    Ok(standardize(group_means, std_floor))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageBatch {
    pub rewards: Vec<Vec<f64>>,
    pub group_means: Vec<f64>,
    pub group_stds: Vec<f64>,
    pub batch_mean: f64,
    pub batch_std: f64,
    pub group: Vec<Vec<f64>>,
    /// `C^i`, zero in group-only mode.
    pub shifts: Vec<f64>,
    pub dual: Vec<Vec<f64>>,
}

/// Group advantages plus, in dual mode, each group's batch shift.
pub fn dual_advantage(rewards: &[Vec<f64>], std_floor: f64, mode: AdvantageMode) -> Result<AdvantageBatch> {
    if rewards.len() < 2 {
        return Err(Error::invalid("batch size", rewards.len(), ">= 2"));
    }
    let g = rewards[0].len();
    let mut group = Vec::with_capacity(rewards.len());
    let mut group_means = Vec::with_capacity(rewards.len());
    let mut group_stds = Vec::with_capacity(rewards.len());
    for row in rewards {
        check_dim("reward matrix row", g, row.len())?;
        let (a, m, s) = group_advantage(row, std_floor)?;
        group.push(a);
        group_means.push(m);
        group_stds.push(s);
    }
    let (mut shifts, batch_mean, batch_std) = batch_shift(&group_means, std_floor)?;
    if mode == AdvantageMode::GroupOnly {
        shifts.iter_mut().for_each(|c| *c = 0.0);
    }
    let dual = group
        .iter()
        .zip(&shifts)
        .map(|(row, c)| row.iter().map(|a| a + c).collect())
        .collect();
    Ok(AdvantageBatch {
        rewards: rewards.to_vec(),
        group_means,
        group_stds,
        batch_mean,
        batch_std,
        group,
        shifts,
        dual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub objective: f64,
    /// `∂objective/∂(new log-prob)` per sample.
    pub coefficients: Vec<Vec<f64>>,
    /// `∂objective/∂(entropy)` per state, `β_H / B_q`.
    pub entropy_coefficient: f64,
    /// Fraction of samples whose clipped branch is strictly active.
    pub clip_fraction: f64,
}

/// Clipped surrogate with entropy bonus:
/// `mean_i mean_g min(ρA, clip(ρ, 1−ε, 1+ε)A) + β_H · mean_i H_i`.
///
/// `entropies` holds one value per state.
pub fn surrogate_objective(
    new_log_probs: &[Vec<f64>],
    old_log_probs: &[Vec<f64>],
    advantages: &[Vec<f64>],
    entropies: &[f64],
    clip: f64,
    entropy_coef: f64,
) -> Result<Surrogate> {
    let bq = advantages.len();
    if bq == 0 {
        return Err(Error::Empty("surrogate batch"));
    }
    check_dim("surrogate new log-probs", bq, new_log_probs.len())?;
    check_dim("surrogate old log-probs", bq, old_log_probs.len())?;
    check_dim("surrogate entropies", bq, entropies.len())?;
    check_finite("entropies", entropies)?;
    let mut objective = 0.0;
    let mut clipped = 0usize;
    let mut total = 0usize;
    let mut coefficients = Vec::with_capacity(bq);
    for i in 0..bq {
        let g = advantages[i].len();
        check_dim("surrogate new log-probs row", g, new_log_probs[i].len())?;
        check_dim("surrogate old log-probs row", g, old_log_probs[i].len())?;
        check_finite("old log-probs", &old_log_probs[i])?;
        check_finite("new log-probs", &new_log_probs[i])?;
        check_finite("advantages", &advantages[i])?;
        let scale = 1.0 / (bq * g) as f64;
        let mut row = Vec::with_capacity(g);
        let mut sum = 0.0;
        for s in 0..g {
            let a = advantages[i][s];
            let ratio = (new_log_probs[i][s] - old_log_probs[i][s]).exp();
            let plain = ratio * a;
            let capped = ratio.clamp(1.0 - clip, 1.0 + clip) * a;
            if plain <= capped {
                sum += plain;
                row.push(plain * scale);
            } else {
                sum += capped;
                clipped += 1;
                row.push(0.0);
            }
            total += 1;
        }
        objective += sum / g as f64;
        coefficients.push(row);
    }
    let mean_entropy = entropies.iter().sum::<f64>() / bq as f64;
    Ok(Surrogate {
        objective: objective / bq as f64 + entropy_coef * mean_entropy,
        coefficients,
        entropy_coefficient: entropy_coef / bq as f64,
        clip_fraction: clipped as f64 / total as f64,
    })
}

/// A source of query states and rewards for sampled actions.
pub trait Environment: Sync {
    fn state_count(&self) -> usize;
    fn state_features(&self, index: usize) -> &[f64];
    fn reward(&self, index: usize, action: &FusionAction, rng: &mut SeededRng) -> Result<RewardBreakdown>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub mean_reward: f64,
    pub mean_engagement: f64,
    pub mean_satisfaction: f64,
    pub mean_entropy: f64,
    /// Averaged over epochs.
    pub clip_fraction: f64,
    /// `mean_i |C^i|`.
    pub mean_abs_shift: f64,
    /// Surrogate value at the last epoch, before its update.
    pub objective: f64,
}

struct Rollout {
    state: usize,
    actions: Vec<Vec<usize>>,
    old_log_probs: Vec<f64>,
    rewards: Vec<RewardBreakdown>,
    entropy: f64,
}

fn rollout<E: Environment>(
    env: &E,
    params: &PolicyParams,
    space: &ActionSpace,
    mode: &ActionMode,
    state: usize,
    group_size: usize,
    rng: &mut SeededRng,
) -> Result<Rollout> {
    let out = forward(params, env.state_features(state))?;
    let mut actions = Vec::with_capacity(group_size);
    let mut old_log_probs = Vec::with_capacity(group_size);
    let mut rewards = Vec::with_capacity(group_size);
    for _ in 0..group_size {
        let (a, lp) = sample_action_with(&out, space, mode, rng)?;
        rewards.push(env.reward(state, &a, rng)?);
        old_log_probs.push(lp);
        actions.push(a.bin_indices);
    }
    Ok(Rollout {
        state,
        actions,
        old_log_probs,
        rewards,
        entropy: entropy_with(&out, mode),
    })
}

/// Gradient of the surrogate, given per-sample log-prob coefficients and
/// the per-state entropy coefficient.
pub fn surrogate_gradient(
    params: &PolicyParams,
    traces: &[ForwardTrace],
    actions: &[Vec<Vec<usize>>],
    coefficients: &[Vec<f64>],
    entropy_coefficient: f64,
    mode: &ActionMode,
) -> Result<PolicyParams> {
    check_dim("gradient traces", coefficients.len(), traces.len())?;
    check_dim("gradient actions", coefficients.len(), actions.len())?;
    let per_state = traces
        .par_iter()
        .zip(actions.par_iter())
        .zip(coefficients.par_iter())
        .map(|((trace, acts), coefs)| {
            let out = &trace.output;
            let mut d = logit_gradient(out, &acts[0], 0.0, entropy_coefficient, mode)?;
            for (a, &c) in acts.iter().zip(coefs) {
                if c == 0.0 {
                    continue;
                }
                let g = logit_gradient(out, a, c, 0.0, mode)?;
                for (di, gi) in d.iter_mut().zip(&g) {
                    di.iter_mut().zip(gi).for_each(|(x, y)| *x += y);
                }
            }
            let mut grad = params.zeros_like();
            backprop_into(params, trace, &d, &mut grad);
            Ok(grad)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = params.zeros_like();
    for g in &per_state {
        total.axpy(1.0, g);
    }
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: PolicyParams,
    pub trace: Vec<IterationMetrics>,
}

/// Runs `cfg.iterations` rounds of sample → advantage → `E` ascent epochs.
///
/// Iteration `t` draws from substream `drpo/t` of `rng`, and query slot `i`
/// within it from `drpo/t/i`, so results do not depend on thread count.
/// `on_iteration` sees the metrics and the updated parameters.
pub fn train<E: Environment>(
    env: &E,
    mut params: PolicyParams,
    space: &ActionSpace,
    mode: &ActionMode,
    cfg: &DrpoConfig,
    rng: &SeededRng,
    mut on_iteration: impl FnMut(&IterationMetrics, &PolicyParams) -> Result<()>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    let n = env.state_count();
    if n == 0 {
        return Err(Error::Empty("training states"));
    }
    let mut velocity = params.zeros_like();
    let mut trace = Vec::with_capacity(cfg.iterations);
    for iteration in 0..cfg.iterations {
        let it_rng = rng.split(&format!("drpo/{iteration}"));
        let mut pick = it_rng.split("states");
        let states: Vec<usize> = if cfg.batch_queries <= n {
            sample_indices(&mut pick, n, cfg.batch_queries).into_vec()
        } else {
            (0..cfg.batch_queries).map(|_| pick.below(n)).collect()
        };
        let rollouts = states
            .par_iter()
            .enumerate()
            .map(|(slot, &s)| {
                let mut r = it_rng.split(&slot.to_string());
                rollout(env, &params, space, mode, s, cfg.group_size, &mut r)
            })
            .collect::<Result<Vec<_>>>()?;
        let totals: Vec<Vec<f64>> = rollouts.iter().map(|r| r.rewards.iter().map(|b| b.total()).collect()).collect();
        let adv = dual_advantage(&totals, cfg.std_floor, cfg.advantage_mode)?;
        let old: Vec<Vec<f64>> = rollouts.iter().map(|r| r.old_log_probs.clone()).collect();
        let actions: Vec<Vec<Vec<usize>>> = rollouts.iter().map(|r| r.actions.clone()).collect();

        let mut clip_sum = 0.0;
        let mut objective = 0.0;
        for _ in 0..cfg.epochs {
            let traces = rollouts
                .par_iter()
                .map(|r| forward_trace(&params, env.state_features(r.state)))
                .collect::<Result<Vec<_>>>()?;
            let new = traces
                .iter()
                .zip(&actions)
                .map(|(t, acts)| acts.iter().map(|a| log_prob_with(&t.output, a, mode)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            let entropies: Vec<f64> = traces.iter().map(|t| entropy_with(&t.output, mode)).collect();
            let s = surrogate_objective(&new, &old, &adv.dual, &entropies, cfg.clip, cfg.entropy_coef)?;
            clip_sum += s.clip_fraction;
            objective = s.objective;
            let grad = surrogate_gradient(&params, &traces, &actions, &s.coefficients, s.entropy_coefficient, mode)?;
            velocity.scale(cfg.momentum);
            velocity.axpy(1.0, &grad);
            params.axpy(cfg.learning_rate, &velocity);
            if let Some(block) = params.first_non_finite() {
                return Err(Error::NonFinite(format!(
                    "policy parameter {block} after iteration {iteration} (objective {objective}, gradient norm {})",
                    grad.norm()
                )));
            }
        }

        let count = (rollouts.len() * cfg.group_size) as f64;
        let sum_of = |f: fn(&RewardBreakdown) -> f64| rollouts.iter().flat_map(|r| r.rewards.iter().map(f)).sum::<f64>() / count;
        let metrics = IterationMetrics {
            iteration,
            mean_reward: sum_of(|b| b.total()),
            mean_engagement: sum_of(|b| b.engagement),
            mean_satisfaction: sum_of(|b| b.satisfaction),
            mean_entropy: rollouts.iter().map(|r| r.entropy).sum::<f64>() / rollouts.len() as f64,
            clip_fraction: clip_sum / cfg.epochs as f64,
            mean_abs_shift: adv.shifts.iter().map(|c| c.abs()).sum::<f64>() / adv.shifts.len() as f64,
            objective,
        };
        on_iteration(&metrics, &params)?;
        trace.push(metrics);
    }
    Ok(TrainOutput { params, trace })
}

/// One state, two actions on a single task: bin 1 pays 1, bin 0 pays 0.
#[derive(Debug, Clone)]
pub struct TwoArmBandit {
    pub state: Vec<f64>,
}

impl Default for TwoArmBandit {
    fn default() -> Self {
        Self { state: vec![1.0] }
    }
}

impl TwoArmBandit {
    pub fn action_space() -> ActionSpace {
        ActionSpace::new(vec![vec![0.0, 1.0]], vec![(0.0, 1.0)], 1.0).expect("two-bin space is valid")
    }
}

impl Environment for TwoArmBandit {
    fn state_count(&self) -> usize {
        1
    }

    fn state_features(&self, _: usize) -> &[f64] {
        &self.state
    }

    fn reward(&self, _: usize, action: &FusionAction, _: &mut SeededRng) -> Result<RewardBreakdown> {
        Ok(RewardBreakdown {
            engagement: action.bin_indices[0] as f64,
            ..Default::default()
        })
    }
}
