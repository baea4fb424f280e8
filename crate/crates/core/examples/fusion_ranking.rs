//! Ranking one candidate set under different fusion weights, and the size of
//! the feasible weight grid.
//!
//! ```text
//! cargo run --example fusion_ranking
//! ```

use satfusion::fusion::{enumerate_feasible, fuse_score, rank, ActionSpace};
use satfusion::types::ScoreVector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Scores per task: click probability, long-play probability, expected
    // seconds watched, relevance.
    let candidates = [
        ("viral clip", [0.60, 0.10, 12.0, 0.20]),
        ("tutorial", [0.20, 0.45, 95.0, 0.90]),
        ("news recap", [0.35, 0.25, 40.0, 0.70]),
        ("off-topic ad", [0.50, 0.05, 5.0, 0.05]),
    ];
    let scores = candidates
        .iter()
        .map(|(_, s)| ScoreVector::new(s.to_vec()))
        .collect::<Result<Vec<_>, _>>()?;

    let space = ActionSpace::uniform_grid(4, 0.0, 1.0, 5, 0.01)?;
    for bins in [vec![1, 1, 1, 1], vec![4, 0, 0, 0], vec![0, 1, 1, 2]] {
        let action = space.action(bins)?;
        let list = rank(&scores, &action.weights)?;
        println!("weights {:?}", action.weights);
        for (pos, &i) in list.order.iter().enumerate() {
            println!(
                "  {}. {:<13} fused {:.4}",
                pos + 1,
                candidates[i].0,
                fuse_score(&scores[i], &action.weights)?
            );
        }
    }

    let feasible = enumerate_feasible(&space)?;
    println!(
        "\n{} of {} grid actions sum to 1 within {}",
        feasible.len(),
        space.bins_per_task().pow(space.tasks() as u32),
        space.tolerance()
    );
    Ok(())
}
