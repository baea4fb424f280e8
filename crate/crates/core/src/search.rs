//! The synthetic environment as a policy-training task.

use crate::drpo::Environment;
use crate::error::Result;
use crate::reward::{engagement_reward, format_action_reward, format_relevance_reward, RewardBreakdown, RewardConfig};
use crate::rng::SeededRng;
use crate::satisfaction::{list_features, predict_satisfaction, RewardModelParams};
use crate::simenv::{QueryContext, SyntheticEnv};
use crate::types::FusionAction;

/// Scores sampled actions on a query pool: engagement from freshly realized
/// feedback, satisfaction from the reward model (zero without one), and the
/// two format penalties.
#[derive(Debug, Clone, Copy)]
pub struct SearchTask<'a> {
    pub env: &'a SyntheticEnv,
    pub pool: &'a [QueryContext],
    pub reward_model: Option<&'a RewardModelParams>,
    pub reward: &'a RewardConfig,
}

impl SearchTask<'_> {
    pub fn breakdown(&self, ctx: &QueryContext, action: &FusionAction, rng: &mut SeededRng) -> Result<RewardBreakdown> {
        let list = self.env.rank(ctx, action)?;
        let feedback = self.env.realize_feedback(ctx, &list, rng)?;
        let satisfaction = match self.reward_model {
            Some(rm) => predict_satisfaction(rm, &ctx.state_features, &list_features(&ctx.candidates, &list))?,
            None => 0.0,
        };
        let relevance: Vec<f64> = ctx.candidates.iter().map(|c| c.relevance).collect();
        Ok(RewardBreakdown {
            engagement: engagement_reward(&list, &feedback, self.reward)?,
            satisfaction,
            format_action: format_action_reward(action, self.reward.xi),
            format_relevance: format_relevance_reward(
                &list,
                &relevance,
                self.reward.relevance_threshold,
                self.reward.relevance_top_k,
            ),
        })
    }
}

impl Environment for SearchTask<'_> {
    fn state_count(&self) -> usize {
        self.pool.len()
    }

    fn state_features(&self, index: usize) -> &[f64] {
        &self.pool[index].state_features
    }

    fn reward(&self, index: usize, action: &FusionAction, rng: &mut SeededRng) -> Result<RewardBreakdown> {
        self.breakdown(&self.pool[index], action, rng)
    }
}
