//! The training reward of one ranked list: engagement NDCG, satisfaction,
//! and the two format penalties.
//!
//! ```text
//! cargo run --example composite_reward
//! ```

use satfusion::fusion::RankedList;
use satfusion::reward::{engagement_reward, format_action_reward, format_relevance_reward, RewardBreakdown, RewardConfig};
use satfusion::types::{FusionAction, ItemFeedback};

fn feedback(click: bool, long_play: bool, relevance: f64) -> ItemFeedback {
    ItemFeedback {
        click,
        long_play,
        duration: if long_play { 45.0 } else { 3.0 },
        relevance_label: relevance,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RewardConfig::default();
    let items = [
        feedback(true, true, 0.9),
        feedback(true, false, 0.6),
        feedback(false, false, 0.1),
        feedback(true, true, 0.8),
        feedback(false, false, 0.5),
    ];
    let relevance: Vec<f64> = items.iter().map(|f| f.relevance_label).collect();
    let action = FusionAction {
        bin_indices: vec![1, 1, 1, 1],
        weights: vec![0.25; 4],
    };
    let satisfaction = 0.62;

    for order in [vec![0, 3, 1, 4, 2], vec![2, 0, 3, 1, 4], vec![4, 2, 1, 3, 0]] {
        let list = RankedList::from_order(order.clone())?;
        let r = RewardBreakdown {
            engagement: engagement_reward(&list, &items, &cfg)?,
            satisfaction,
            format_action: format_action_reward(&action, cfg.xi),
            format_relevance: format_relevance_reward(&list, &relevance, cfg.relevance_threshold, cfg.relevance_top_k),
        };
        println!(
            "order {order:?}: eng {:.4} + sat {:.2} + action {:+} + relevance {:+} = {:+.4}",
            r.engagement,
            r.satisfaction,
            r.format_action,
            r.format_relevance,
            r.total()
        );
    }

    let off_grid = FusionAction {
        bin_indices: vec![2, 2, 2, 2],
        weights: vec![0.5; 4],
    };
    println!("\nweights summing to 2 cost {}", format_action_reward(&off_grid, cfg.xi));
    Ok(())
}
