//! Synthetic short-video search environment.
//!
//! Users differ in activity, which sets both their typical gap between
//! queries and their baseline retention. Each query draws a difficulty that
//! lowers the relevance and quality of its candidates (when heterogeneity is
//! on). Candidates carry three latents in `[0, 1]`: quality, relevance and
//! appeal. A candidate's task scores are noisy, increasing functions of a
//! per-task mix of the latents, scaled by per-task multipliers so the log
//! transform has real work to do.
//!
//! Feedback follows a position-based examination model with the NDCG
//! discount; appeal draws clicks. Query outcomes depend only on the top-`k`
//! mean of `relevance·quality` of the shown list, so a ranking tuned for
//! clicks alone can leave users less satisfied.

use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fusion::{rank, RankedList};
use crate::nn::logistic;
use crate::rng::SeededRng;
use crate::satisfaction::gap_baseline;
use crate::types::{Candidate, FusionAction, ItemFeedback, QueryEpisode, ScoreVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub users: usize,
    pub train_queries: usize,
    pub heldout_queries: usize,
    /// Candidates per query `N`.
    pub candidates: usize,
    /// Task count `k`.
    pub tasks: usize,
    pub score_scales: Vec<f64>,
    /// Per task, non-negative weights of (quality, relevance, appeal) in the
    /// score driver.
    pub score_drivers: Vec<[f64; 3]>,
    /// Per task, log-score change across the full range of the driver:
    /// `s_j = scale_j · exp(sharpness_j · driver) · noise`.
    pub score_sharpness: Vec<f64>,
    /// Per task, standard deviation of the multiplicative log-normal noise.
    pub score_noise: Vec<f64>,
    /// How strongly query difficulty depresses relevance and quality, in `[0, 1]`.
    pub query_heterogeneity: f64,
    /// Mean share of off-topic candidates; the share grows with difficulty.
    pub off_topic_rate: f64,
    /// Off-topic candidates have relevance uniform below this value, on-topic
    /// ones above it.
    pub off_topic_relevance: f64,
    /// Click probability of an examined item with zero quality and relevance.
    pub click_floor: f64,
    /// Weights of (quality, relevance, appeal) in click attractiveness; they
    /// must sum to 1.
    pub click_mix: [f64; 3],
    /// `P(long_play | click) = long_play_rate · quality`.
    pub long_play_rate: f64,
    /// Seconds watched by a clicked, perfect-quality item.
    pub max_duration: f64,
    /// Positions averaged into the list utility.
    pub utility_top_k: usize,
    /// Reformulation steepness `θ_r`.
    pub reform_steepness: f64,
    /// Utility at which reformulation is a coin flip.
    pub utility_threshold: f64,
    /// Gap sensitivity `θ_g`.
    pub gap_sensitivity: f64,
    pub gap_noise: f64,
    /// Retention logit intercept.
    pub retention_base: f64,
    /// Retention logit slope in user activity.
    pub retention_activity: f64,
    /// Retention sensitivity `θ_ret` to utility.
    pub retention_sensitivity: f64,
    /// Typical gap of a fully active user, seconds.
    pub mean_gap: f64,
    pub gap_history: usize,
    pub history_noise: f64,
    /// Mean follow-up clicks for a fully active, retained user.
    pub future_activity: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            users: 100,
            train_queries: 2000,
            heldout_queries: 500,
            candidates: 20,
            tasks: 4,
            score_scales: vec![1.0, 20.0, 300.0, 5.0],
            score_drivers: vec![[0.0, 0.3, 0.7], [0.8, 0.0, 0.2], [0.5, 0.0, 0.5], [0.0, 1.0, 0.0]],
            score_sharpness: vec![3.0, 3.0, 3.0, 4.0],
            score_noise: vec![0.4, 0.5, 0.6, 0.15],
            query_heterogeneity: 1.0,
            off_topic_rate: 0.1,
            off_topic_relevance: 0.15,
            click_floor: 0.05,
            click_mix: [0.1, 0.3, 0.6],
            long_play_rate: 0.8,
            max_duration: 60.0,
            utility_top_k: 10,
            reform_steepness: 20.0,
            utility_threshold: 0.2,
            gap_sensitivity: 10.0,
            gap_noise: 0.5,
            retention_base: -2.0,
            retention_activity: 1.5,
            retention_sensitivity: 12.0,
            mean_gap: 600.0,
            gap_history: 20,
            history_noise: 0.6,
            future_activity: 4.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.candidates < 2 {
            return Err(Error::invalid("env.candidates", self.candidates, ">= 2"));
        }
        if self.tasks < 2 {
            return Err(Error::invalid("env.tasks", self.tasks, ">= 2"));
        }
        if self.users == 0 || self.train_queries == 0 || self.heldout_queries == 0 {
            return Err(Error::invalid(
                "env.users/train_queries/heldout_queries",
                format!("{}/{}/{}", self.users, self.train_queries, self.heldout_queries),
                ">= 1",
            ));
        }
        for (name, len) in [
            ("env.score_scales", self.score_scales.len()),
            ("env.score_drivers", self.score_drivers.len()),
            ("env.score_sharpness", self.score_sharpness.len()),
            ("env.score_noise", self.score_noise.len()),
        ] {
            if len != self.tasks {
                return Err(Error::invalid(name, format!("{len} entries"), format!("{} entries", self.tasks)));
            }
        }
        if self.score_scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("env.score_scales", format!("{:?}", self.score_scales), "all > 0"));
        }
        if self
            .score_drivers
            .iter()
            .any(|w| w.iter().any(|x| !(*x >= 0.0 && x.is_finite())) || !(w.iter().sum::<f64>() > 0.0))
        {
            return Err(Error::invalid(
                "env.score_drivers",
                format!("{:?}", self.score_drivers),
                "non-negative weights with a positive sum per task",
            ));
        }
        if self.click_mix.iter().any(|x| !(*x >= 0.0)) || (self.click_mix.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("env.click_mix", format!("{:?}", self.click_mix), "non-negative, summing to 1"));
        }
        if self.score_sharpness.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("env.score_sharpness", format!("{:?}", self.score_sharpness), "all > 0"));
        }
        if self.score_noise.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
            return Err(Error::invalid("env.score_noise", format!("{:?}", self.score_noise), "all >= 0"));
        }
        if !(0.0..=0.5).contains(&self.off_topic_rate) {
            return Err(Error::invalid("env.off_topic_rate", self.off_topic_rate, "in [0, 0.5]"));
        }
        for (name, v) in [
            ("env.query_heterogeneity", self.query_heterogeneity),
            ("env.click_floor", self.click_floor),
            ("env.off_topic_relevance", self.off_topic_relevance),
            ("env.long_play_rate", self.long_play_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(name, v, "in [0, 1]"));
            }
        }
        for (name, v) in [
            ("env.reform_steepness", self.reform_steepness),
            ("env.utility_threshold", self.utility_threshold),
            ("env.gap_sensitivity", self.gap_sensitivity),
            ("env.gap_noise", self.gap_noise),
            ("env.retention_base", self.retention_base),
            ("env.retention_activity", self.retention_activity),
            ("env.retention_sensitivity", self.retention_sensitivity),
            ("env.history_noise", self.history_noise),
            ("env.future_activity", self.future_activity),
            ("env.max_duration", self.max_duration),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, v, "finite"));
            }
        }
        if !(self.mean_gap > 0.0) {
            return Err(Error::invalid("env.mean_gap", self.mean_gap, "> 0"));
        }
        if self.gap_history < 10 {
            return Err(Error::invalid("env.gap_history", self.gap_history, ">= 10"));
        }
        if self.utility_top_k == 0 {
            return Err(Error::invalid("env.utility_top_k", self.utility_top_k, ">= 1"));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        3 + 2 * self.tasks
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    /// In `(0, 1]`.
    pub activity: f64,
    pub gap_history: Vec<f64>,
    /// Personal gap baseline `μ_u`, seconds.
    pub gap_baseline: f64,
    pub retention_logit: f64,
}

/// A query before any ranking decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryContext {
    pub user_id: usize,
    pub query_id: usize,
    /// In `[0, 1]`; harder queries have fewer relevant, lower-quality items.
    pub difficulty: f64,
    /// User activity, difficulty, `ln(μ_u / mean_gap)`, then per task the
    /// mean and standard deviation over candidates of
    /// `(ln(1 + s_j) − ln(1 + scale_j)) / sharpness_j`.
    pub state_features: Vec<f64>,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub reformulated: bool,
    pub session_gap: f64,
    pub retained: bool,
    /// Exact probability of `retained`.
    pub retention_probability: f64,
    /// Top-`k` mean of `relevance·quality`.
    pub utility: f64,
}

/// Users plus train and held-out query pools, all fixed by the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticEnv {
    pub config: EnvConfig,
    pub users: Vec<UserProfile>,
    pub train: Vec<QueryContext>,
    pub heldout: Vec<QueryContext>,
}

/// Weighted mean of the latents under `w = (quality, relevance, appeal)`.
pub fn score_driver(w: &[f64; 3], quality: f64, relevance: f64, appeal: f64) -> f64 {
    (w[0] * quality + w[1] * relevance + w[2] * appeal) / w.iter().sum::<f64>()
}

fn standard_normal(rng: &mut SeededRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Mean-one log-normal factor.
fn lognormal_unit(rng: &mut SeededRng, sigma: f64) -> f64 {
    (sigma * standard_normal(rng) - 0.5 * sigma * sigma).exp()
}

impl SyntheticEnv {
    /// Draws users and both query pools. `beta_q` picks the gap quantile used
    /// as each user's baseline.
    pub fn generate(config: &EnvConfig, beta_q: f64, seed: u64) -> Result<Self> {
        config.validate()?;
        let root = SeededRng::new(seed).split("env");
        let mut user_rng = root.split("users");
        let users = (0..config.users)
            .map(|_| {
                let activity = 0.1 + 0.9 * (1.0 - user_rng.uniform());
                let typical = config.mean_gap / activity;
                let gap_history: Vec<f64> = (0..config.gap_history)
                    .map(|_| typical * lognormal_unit(&mut user_rng, config.history_noise))
                    .collect();
                let gap_baseline = gap_baseline(&gap_history, beta_q)?;
                Ok(UserProfile {
                    activity,
                    gap_history,
                    gap_baseline,
                    retention_logit: config.retention_base + config.retention_activity * (activity - 0.5),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut env = Self {
            config: config.clone(),
            users,
            train: Vec::new(),
            heldout: Vec::new(),
        };
        let mut train_rng = root.split("train-pool");
        env.train = (0..config.train_queries)
            .map(|q| env.draw_query(q, &mut train_rng))
            .collect::<Result<_>>()?;
        let mut heldout_rng = root.split("heldout-pool");
        env.heldout = (0..config.heldout_queries)
            .map(|q| env.draw_query(config.train_queries + q, &mut heldout_rng))
            .collect::<Result<_>>()?;
        Ok(env)
    }

    fn draw_query(&self, query_id: usize, rng: &mut SeededRng) -> Result<QueryContext> {
        let cfg = &self.config;
        let user_id = rng.below(self.users.len());
        let difficulty = rng.uniform();
        let h = cfg.query_heterogeneity;
        // Exponent ≥ 1 pushes a uniform draw toward zero.
        let skew = 1.0 + 2.0 * h * difficulty;
        let off_topic = cfg.off_topic_rate * (1.0 + h * (2.0 * difficulty - 1.0));
        let floor = cfg.off_topic_relevance;
        let candidates = (0..cfg.candidates)
            .map(|_| {
                let quality = rng.uniform().powf(skew);
                let relevance = if rng.bernoulli(off_topic) {
                    floor * rng.uniform()
                } else {
                    floor + (1.0 - floor) * rng.uniform().powf(skew)
                };
                let appeal = rng.uniform();
                let scores = (0..cfg.tasks)
                    .map(|j| {
                        let driver = score_driver(&cfg.score_drivers[j], quality, relevance, appeal);
                        cfg.score_scales[j] * (cfg.score_sharpness[j] * driver).exp() * lognormal_unit(rng, cfg.score_noise[j])
                    })
                    .collect();
                Ok(Candidate {
                    scores: ScoreVector::new(scores)?,
                    relevance,
                    quality,
                    appeal,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let user = &self.users[user_id];
        let mut state_features = vec![
            user.activity,
            difficulty,
            (user.gap_baseline / cfg.mean_gap).ln(),
        ];
        let n = candidates.len() as f64;
        for j in 0..cfg.tasks {
            let (offset, width) = (cfg.score_scales[j].ln_1p(), cfg.score_sharpness[j]);
            let logs: Vec<f64> = candidates.iter().map(|c| (c.scores.values()[j].ln_1p() - offset) / width).collect();
            let mean = logs.iter().sum::<f64>() / n;
            let var = logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            state_features.push(mean);
            state_features.push(var.sqrt());
        }
        Ok(QueryContext {
            user_id,
            query_id,
            difficulty,
            state_features,
            candidates,
        })
    }

    pub fn user(&self, ctx: &QueryContext) -> &UserProfile {
        &self.users[ctx.user_id]
    }

    /// Ranks a query's candidates under `action`.
    pub fn rank(&self, ctx: &QueryContext, action: &FusionAction) -> Result<RankedList> {
        let scores: Vec<ScoreVector> = ctx.candidates.iter().map(|c| c.scores.clone()).collect();
        rank(&scores, &action.weights)
    }

    /// Probability that the user examines position `pos` (0-based).
    pub fn examination(pos: usize) -> f64 {
        1.0 / ((pos + 2) as f64).log2()
    }

    /// Click probability of an examined item.
    pub fn attractiveness(&self, c: &Candidate) -> f64 {
        let m = score_driver(&self.config.click_mix, c.quality, c.relevance, c.appeal);
        self.config.click_floor + (1.0 - self.config.click_floor) * m
    }

    /// Exact click probability of every candidate, indexed by candidate.
    pub fn click_probabilities(&self, ctx: &QueryContext, ranking: &RankedList) -> Result<Vec<f64>> {
        self.check_ranking(ctx, ranking)?;
        let mut p = vec![0.0; ctx.candidates.len()];
        for (pos, &i) in ranking.order.iter().enumerate() {
            p[i] = Self::examination(pos) * self.attractiveness(&ctx.candidates[i]);
        }
        Ok(p)
    }

    fn check_ranking(&self, ctx: &QueryContext, ranking: &RankedList) -> Result<()> {
        let n = ctx.candidates.len();
        if ranking.order.len() != n {
            return Err(Error::InvalidPermutation(n));
        }
        let mut seen = vec![false; n];
        for &i in &ranking.order {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidPermutation(n));
            }
        }
        Ok(())
    }

    /// Samples per-item feedback for a shown ranking, indexed by candidate.
    /// Draws are made in display order.
    pub fn realize_feedback(&self, ctx: &QueryContext, ranking: &RankedList, rng: &mut SeededRng) -> Result<Vec<ItemFeedback>> {
        let probs = self.click_probabilities(ctx, ranking)?;
        let cfg = &self.config;
        let mut feedback = vec![
            ItemFeedback {
                click: false,
                long_play: false,
                duration: 0.0,
                relevance_label: 0.0,
            };
            ctx.candidates.len()
        ];
        for &i in &ranking.order {
            let c = &ctx.candidates[i];
            let click = rng.bernoulli(probs[i]);
            let long_play = click && rng.bernoulli(cfg.long_play_rate * c.quality);
            let duration = if click {
                cfg.max_duration * (0.1 + 0.9 * c.quality) * lognormal_unit(rng, 0.3)
            } else {
                0.0
            };
            feedback[i] = ItemFeedback {
                click,
                long_play,
                duration,
                relevance_label: c.relevance,
            };
        }
        Ok(feedback)
    }

    /// Top-`k` mean of `relevance·quality` in display order.
    pub fn utility(&self, ctx: &QueryContext, ranking: &RankedList) -> f64 {
        let k = self.config.utility_top_k.min(ranking.len());
        ranking
            .order
            .iter()
            .take(k)
            .map(|&i| ctx.candidates[i].relevance * ctx.candidates[i].quality)
            .sum::<f64>()
            / k as f64
    }

    pub fn reformulation_probability(&self, utility: f64) -> f64 {
        logistic(self.config.reform_steepness * (self.config.utility_threshold - utility))
    }

    pub fn retention_probability(&self, user: &UserProfile, utility: f64) -> f64 {
        logistic(user.retention_logit + self.config.retention_sensitivity * utility)
    }

    /// Median-free gap scale: `μ_u · exp(−θ_g (U − u_thresh))`. The realized
    /// gap multiplies this by mean-one log-normal noise.
    pub fn expected_gap(&self, user: &UserProfile, utility: f64) -> f64 {
        user.gap_baseline * (-self.config.gap_sensitivity * (utility - self.config.utility_threshold)).exp()
    }

    /// Samples the query-level outcomes of a shown ranking.
    pub fn realize_outcomes(
        &self,
        ctx: &QueryContext,
        ranking: &RankedList,
        feedback: &[ItemFeedback],
        rng: &mut SeededRng,
    ) -> Result<QueryOutcome> {
        self.check_ranking(ctx, ranking)?;
        check_dim("outcome feedback", ctx.candidates.len(), feedback.len())?;
        let user = self.user(ctx);
        let utility = self.utility(ctx, ranking);
        let reformulated = rng.bernoulli(self.reformulation_probability(utility));
        let session_gap = self.expected_gap(user, utility) * lognormal_unit(rng, self.config.gap_noise);
        let retention_probability = self.retention_probability(user, utility);
        let retained = rng.bernoulli(retention_probability);
        Ok(QueryOutcome {
            reformulated,
            session_gap,
            retained,
            retention_probability,
            utility,
        })
    }

    /// Follow-up clicks and long plays in the window after the query.
    pub fn realize_future_activity(&self, ctx: &QueryContext, outcome: &QueryOutcome, rng: &mut SeededRng) -> (u32, u32) {
        let user = self.user(ctx);
        let rate = self.config.future_activity * user.activity * if outcome.retained { 1.0 } else { 0.25 };
        let draw = |rng: &mut SeededRng, lambda: f64| -> u32 {
            if lambda <= 0.0 {
                return 0;
            }
            Poisson::new(lambda).map(|d| d.sample(rng) as u32).unwrap_or(0)
        };
        let clicks = draw(rng, rate);
        let long_plays = draw(rng, 0.5 * rate);
        (clicks, long_plays)
    }

    /// Shows `ctx` under `action` and records everything that follows.
    pub fn log_episode(&self, ctx: &QueryContext, action: &FusionAction, rng: &mut SeededRng) -> Result<(QueryEpisode, QueryOutcome)> {
        let ranking = self.rank(ctx, action)?;
        let feedback = self.realize_feedback(ctx, &ranking, rng)?;
        let outcome = self.realize_outcomes(ctx, &ranking, &feedback, rng)?;
        let (future_clicks, future_long_plays) = self.realize_future_activity(ctx, &outcome, rng);
        let episode = QueryEpisode {
            user_id: ctx.user_id,
            query_id: ctx.query_id,
            state_features: ctx.state_features.clone(),
            candidates: ranking.order.iter().map(|&i| ctx.candidates[i].clone()).collect(),
            fused_scores: ranking.reorder(&ranking.fused_scores),
            feedback: ranking.reorder(&feedback),
            reformulated: outcome.reformulated,
            session_gap: outcome.session_gap,
            retained: outcome.retained,
            user_gap_baseline: self.user(ctx).gap_baseline,
            future_clicks,
            future_long_plays,
        };
        Ok((episode, outcome))
    }
}
