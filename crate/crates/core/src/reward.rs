//! Composite ranking reward: engagement NDCG + satisfaction + two format
//! penalties.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::eval::ndcg_at;
use crate::fusion::RankedList;
use crate::types::{FusionAction, ItemFeedback};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub click_weight: f64,
    pub long_play_weight: f64,
    pub ndcg_cutoff: usize,
    /// Minimum acceptable relevance in the top positions.
    pub relevance_threshold: f64,
    pub relevance_top_k: usize,
    pub xi: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            click_weight: 1.0,
            long_play_weight: 2.0,
            ndcg_cutoff: 10,
            relevance_threshold: 0.2,
            relevance_top_k: 3,
            xi: 0.01,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.click_weight >= 0.0 && self.long_play_weight >= 0.0) {
            return Err(Error::invalid(
                "reward.click_weight/long_play_weight",
                format!("{}/{}", self.click_weight, self.long_play_weight),
                ">= 0",
            ));
        }
        if self.ndcg_cutoff == 0 {
            return Err(Error::invalid("reward.ndcg_cutoff", self.ndcg_cutoff, ">= 1"));
        }
        if self.relevance_top_k == 0 {
            return Err(Error::invalid("reward.relevance_top_k", self.relevance_top_k, ">= 1"));
        }
        if !(self.relevance_threshold > 0.0 && self.relevance_threshold < 1.0) {
            return Err(Error::invalid(
                "reward.relevance_threshold",
                self.relevance_threshold,
                "in (0, 1)",
            ));
        }
        if !(self.xi > 0.0) {
            return Err(Error::invalid("reward.xi", self.xi, "> 0"));
        }
        Ok(())
    }

    /// `click_weight·click + long_play_weight·long_play`
    pub fn gain(&self, fb: &ItemFeedback) -> f64 {
        let c = if fb.click { 1.0 } else { 0.0 };
        let l = if fb.long_play { 1.0 } else { 0.0 };
        self.click_weight * c + self.long_play_weight * l
    }
}

/// NDCG of engagement gains at the configured cutoff. `feedback` is indexed
/// by candidate.
pub fn engagement_reward(list: &RankedList, feedback: &[ItemFeedback], cfg: &RewardConfig) -> Result<f64> {
    check_dim("engagement feedback", list.len(), feedback.len())?;
    let gains: Vec<f64> = feedback.iter().map(|f| cfg.gain(f)).collect();
    ndcg_at(list, &gains, cfg.ndcg_cutoff)
}

/// `0` when `|Σ w − 1| ≤ ξ`, else `−1`.
pub fn format_action_reward(a: &FusionAction, xi: f64) -> f64 {
    if crate::fusion::is_feasible(a, xi) {
        0.0
    } else {
        -1.0
    }
}

/// `−2` when any of the first `min(k, len)` shown items has relevance
/// strictly below `tau`, else `0`. `relevance` is indexed by candidate.
pub fn format_relevance_reward(list: &RankedList, relevance: &[f64], tau: f64, k: usize) -> f64 {
    if list.order.iter().take(k).any(|&i| relevance[i] < tau) {
        -2.0
    } else {
        0.0
    }
}

pub fn composite_reward(r_eng: f64, r_sat: f64, r_fmt_a: f64, r_fmt_r: f64) -> f64 {
    r_eng + r_sat + r_fmt_a + r_fmt_r
}

/// The four reward components of one ranked list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub engagement: f64,
    pub satisfaction: f64,
    pub format_action: f64,
    pub format_relevance: f64,
}

impl RewardBreakdown {
    pub fn total(&self) -> f64 {
        composite_reward(
            self.engagement,
            self.satisfaction,
            self.format_action,
            self.format_relevance,
        )
    }
}
