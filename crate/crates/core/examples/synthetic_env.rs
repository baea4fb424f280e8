//! Scores every feasible fixed weight vector on the held-out pool of the
//! synthetic environment, showing how the reward terms trade off.
//!
//! ```text
//! cargo run --release --example synthetic_env -- [seed] [key=value ...]
//! ```

use satfusion::config::{parse_override, ExperimentConfig};
use satfusion::eval::{evaluate_policy, EvalContext, FixedWeights};
use satfusion::fusion::enumerate_feasible;
use satfusion::runner::{build_env, fit_reward_model, generate_episodes};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let mut overrides = vec![parse_override(&format!("seed={seed}"))?];
    for a in args {
        overrides.push(parse_override(&a)?);
    }
    let cfg = ExperimentConfig::from_toml_with("", &overrides)?;
    let env = build_env(&cfg)?;
    let episodes = generate_episodes(&cfg, &env)?;
    let rm = fit_reward_model(&cfg, &episodes)?;
    println!(
        "{} users, {} train / {} held-out queries, {} logged episodes",
        env.users.len(),
        env.train.len(),
        env.heldout.len(),
        episodes.len()
    );
    println!(
        "reward model weighted MSE {:.5} -> {:.5}\n",
        rm.loss_trace.first().copied().unwrap_or(f64::NAN),
        rm.loss_trace.last().copied().unwrap_or(f64::NAN)
    );
    let ec = EvalContext {
        env: &env,
        reward_model: &rm.params,
        sat: &cfg.satisfaction,
        reward: &cfg.reward,
    };
    let mut rows = Vec::new();
    for action in enumerate_feasible(&cfg.action_space()?)? {
        let r = evaluate_policy(&FixedWeights(action.clone()), &env.heldout, &ec, cfg.seed)?;
        rows.push((action, r));
    }
    rows.sort_by(|a, b| b.1["composite_reward"].total_cmp(&a.1["composite_reward"]));
    println!(
        "{:<28} {:>9} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
        "weights", "composite", "eng", "sat", "rel pen", "true", "ret", "util"
    );
    for (a, r) in &rows {
        let w: Vec<String> = a.weights.iter().map(|w| format!("{w:.2}")).collect();
        println!(
            "{:<28} {:>9.4} {:>7.4} {:>7.4} {:>7.3} {:>7.4} {:>7.4} {:>7.4}",
            w.join(" "),
            r["composite_reward"],
            r["engagement_reward"],
            r["satisfaction_score"],
            r["format_relevance_penalty"],
            r["true_satisfaction"],
            r["retention_probability"],
            r["utility"]
        );
    }
    Ok(())
}
