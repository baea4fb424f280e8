//! An untrained task-relation-aware policy on one query of the synthetic
//! environment: per-task bin probabilities, task attention, gates, and the
//! sampled and greedy actions.
//!
//! ```text
//! cargo run --release --example traf_policy -- [seed]
//! ```

use satfusion::config::{parse_override, ExperimentConfig};
use satfusion::policy::{entropy_with, forward, greedy_action, sample_action_with, PolicyParams};
use satfusion::rng::SeededRng;
use satfusion::runner::build_env;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let cfg = ExperimentConfig::from_toml_with("", &[parse_override(&format!("seed={seed}"))?, parse_override("env.heldout_queries=1")?])?;
    let env = build_env(&cfg)?;
    let query = &env.heldout[0];
    let space = cfg.action_space()?;
    let mode = cfg.action_mode()?;
    let params = PolicyParams::init(cfg.policy_shape(true), &mut SeededRng::new(seed))?;
    println!("state features: {:.3?}\n", query.state_features);

    let out = forward(&params, &query.state_features)?;
    for (j, p) in out.probs.iter().enumerate() {
        println!("task {j}: bin probabilities {p:.3?}  gate {:.3}", out.gates[j]);
    }
    println!("\ntask attention:");
    for row in &out.attention {
        println!("  {row:.3?}");
    }
    println!("\nentropy over the feasible set: {:.4} nats", entropy_with(&out, &mode));
    let mut rng = SeededRng::new(seed).split("sample");
    for _ in 0..3 {
        let (a, lp) = sample_action_with(&out, &space, &mode, &mut rng)?;
        println!("sampled {:?} (log-prob {lp:.3})", a.weights);
    }
    println!("greedy  {:?}", greedy_action(&out, &space, &mode)?.weights);
    Ok(())
}
