//! Group-relative versus dual-relative advantages on a small reward batch:
//! within-query differences are identical, but strong queries are lifted and
//! weak ones lowered as a whole.
//!
//! ```text
//! cargo run --example dual_advantage
//! ```

use satfusion::drpo::{dual_advantage, AdvantageMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rewards = vec![
        vec![1.2, 1.5, 1.1, 1.6],
        vec![0.2, 0.6, 0.4, 0.3],
        vec![-1.0, 0.5, -0.5, 0.0],
    ];
    let group = dual_advantage(&rewards, 1e-8, AdvantageMode::GroupOnly)?;
    let dual = dual_advantage(&rewards, 1e-8, AdvantageMode::Dual)?;
    println!("batch mean {:.4}, batch std {:.4}\n", dual.batch_mean, dual.batch_std);
    for (i, row) in rewards.iter().enumerate() {
        println!("query {i}: rewards {row:?}");
        println!("  mean {:.4} std {:.4} shift {:+.4}", dual.group_means[i], dual.group_stds[i], dual.shifts[i]);
        println!("  group {:+.3?}", group.dual[i]);
        println!("  dual  {:+.3?}", dual.dual[i]);
    }
    let total: f64 = dual.dual.iter().flatten().sum();
    println!("\nsum of dual advantages: {total:.2e}");
    Ok(())
}
