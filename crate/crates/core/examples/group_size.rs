//! Held-out composite reward of the full method as the group size `G`
//! grows while `G · B_q` stays fixed.
//!
//! ```text
//! cargo run --release --example group_size -- [seeds] [key=value ...]
//! ```

use satfusion::config::{parse_override, ExperimentConfig};
use satfusion::runner::{run_pipeline, sweep_overrides, Variant};

const GROUP_SIZES: [usize; 4] = [2, 4, 8, 16];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3);
    let extra = args.map(|a| parse_override(&a)).collect::<Result<Vec<_>, _>>()?;

    let mut means = [0.0; GROUP_SIZES.len()];
    for seed in 0..seeds {
        let mut overrides = vec![parse_override(&format!("seed={seed}"))?];
        overrides.extend(extra.iter().cloned());
        let base = ExperimentConfig::from_toml_with("", &overrides)?;
        let mut row = Vec::new();
        for (i, g) in GROUP_SIZES.iter().enumerate() {
            let mut with_g = overrides.clone();
            with_g.extend(sweep_overrides(&base, "G", &g.to_string())?);
            let cfg = ExperimentConfig::from_toml_with("", &with_g)?;
            let run = run_pipeline(&cfg, &[Variant::Full])?;
            let r = run.variants[&Variant::Full].1["composite_reward"];
            means[i] += r / seeds as f64;
            row.push(format!("G={g} (B_q={}): {r:.4}", cfg.drpo.batch_queries));
        }
        println!("seed {seed}: {}", row.join("  "));
    }
    println!("\nmeans over {seeds} seeds:");
    for (g, m) in GROUP_SIZES.iter().zip(means) {
        println!("  G={g:<3} {m:.4}");
    }
    Ok(())
}
