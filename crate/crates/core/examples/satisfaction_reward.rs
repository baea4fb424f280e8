//! The satisfaction reward for a few sessions of one user: personal gap
//! baseline, gap score, retention and reformulation gating, and the
//! confidence weight used when fitting the reward model.
//!
//! ```text
//! cargo run --example satisfaction_reward
//! ```

use satfusion::satisfaction::{confidence, gap_baseline, gap_score, satisfaction_reward, SatConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SatConfig::default();
    let history = [180.0, 420.0, 600.0, 900.0, 1500.0, 3600.0, 7200.0];
    let mu = gap_baseline(&history, cfg.beta_q)?;
    println!("gap baseline (q = {}) = {mu:.1} s\n", cfg.beta_q);

    println!("{:>8} {:>6} {:>8} {:>10} {:>6}", "gap (s)", "ret", "reform", "gap score", "r_sat");
    for (gap, retained, reformulated) in [
        (60.0, true, false),
        (600.0, true, false),
        (600.0, false, false),
        (5000.0, false, false),
        (60.0, true, true),
    ] {
        let g = gap_score(gap, mu, cfg.delta, cfg.temperature)?;
        let r = satisfaction_reward(reformulated, gap, retained, mu, &cfg)?;
        println!("{gap:>8.0} {retained:>6} {reformulated:>8} {g:>10.4} {r:>6.4}");
    }

    println!("\nconfidence from future engagement:");
    for (clicks, long_plays) in [(0.0, 0.0), (1.0, 0.0), (3.0, 2.0), (20.0, 10.0)] {
        println!("  clicks {clicks:>4} long plays {long_plays:>4} -> {:.4}", confidence(clicks, long_plays)?);
    }
    Ok(())
}
