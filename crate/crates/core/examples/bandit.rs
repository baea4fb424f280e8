//! DRPO on a two-arm bandit that pays 1 for the second arm and 0 for the
//! first: the probability of the paying arm over training.
//!
//! ```text
//! cargo run --release --example bandit -- [seed]
//! ```

use satfusion::drpo::{train, DrpoConfig, TwoArmBandit};
use satfusion::policy::{forward, ActionMode, PolicyParams, PolicyShape};
use satfusion::rng::SeededRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let env = TwoArmBandit::default();
    let shape = PolicyShape {
        input_dim: 1,
        hidden: 8,
        layers: 1,
        tasks: 1,
        bins: 2,
        relation_dim: 4,
        relation: true,
    };
    let cfg = DrpoConfig {
        group_size: 16,
        batch_queries: 2,
        iterations: 200,
        ..DrpoConfig::default()
    };
    let init = PolicyParams::init(shape, &mut SeededRng::new(seed))?;
    let out = train(
        &env,
        init,
        &TwoArmBandit::action_space(),
        &ActionMode::Factorized,
        &cfg,
        &SeededRng::new(seed).split("drpo"),
        |m, params| {
            if m.iteration % 20 == 0 {
                let p = forward(params, &env.state)?.probs[0][1];
                println!("iter {:>3}  mean reward {:.3}  P(paying arm) {p:.4}", m.iteration, m.mean_reward);
            }
            Ok(())
        },
    )?;
    println!("final P(paying arm) {:.5}", forward(&out.params, &env.state)?.probs[0][1]);
    Ok(())
}
