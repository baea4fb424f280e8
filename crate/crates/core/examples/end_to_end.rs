//! Full pipeline on the default synthetic environment: log data, fit the
//! satisfaction model, train the full policy and compare it with equal
//! weights on held-out queries.
//!
//! ```text
//! cargo run --release --example end_to_end -- [seed] [key=value ...]
//! ```

use std::time::Instant;

use satfusion::config::{parse_override, ExperimentConfig};
use std::collections::BTreeMap;

use satfusion::eval::{format_report, ActionSelector, GreedyPolicy};
use satfusion::runner::{run_pipeline, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let mut overrides = vec![parse_override(&format!("seed={seed}"))?];
    for a in args {
        overrides.push(parse_override(&a)?);
    }
    let cfg = ExperimentConfig::from_toml_with("", &overrides)?;
    let start = Instant::now();
    let run = run_pipeline(&cfg, &[Variant::Full])?;
    println!(
        "reward model weighted MSE: {:.5} -> {:.5}",
        run.reward_model.loss_trace.first().copied().unwrap_or(f64::NAN),
        run.reward_model.loss_trace.last().copied().unwrap_or(f64::NAN)
    );
    let (trained, report) = &run.variants[&Variant::Full];
    for m in trained.trace.iter().step_by(10) {
        println!(
            "iter {:>4}  reward {:+.4}  eng {:.4}  sat {:.4}  entropy {:.3}  clip {:.3}  |C| {:.3}",
            m.iteration, m.mean_reward, m.mean_engagement, m.mean_satisfaction, m.mean_entropy, m.clip_fraction, m.mean_abs_shift
        );
    }
    let space = cfg.action_space()?;
    let mode = cfg.action_mode()?;
    let greedy = GreedyPolicy { params: &trained.params, space: &space, mode: &mode };
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for ctx in &run.env.heldout {
        let w = greedy.select(&ctx.state_features)?.weights;
        *counts.entry(format!("{w:.2?}")).or_default() += 1;
    }
    println!("\ngreedy actions on held-out queries:");
    for (w, n) in &counts {
        println!("  {w} x{n}");
    }
    println!("\nequal weights:\n{}", format_report(&run.baseline));
    println!("trained policy:\n{}", format_report(report));
    let base = run.baseline["composite_reward"];
    let ours = report["composite_reward"];
    println!(
        "composite reward {ours:+.4} vs {base:+.4} ({:+.1}% relative to |baseline|), {:.1}s",
        100.0 * (ours - base) / base.abs(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
