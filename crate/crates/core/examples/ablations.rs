//! Trains every variant on a few seeds and compares held-out composite
//! reward and ground-truth retention against the full method.
//!
//! ```text
//! cargo run --release --example ablations -- [seeds] [key=value ...]
//! ```

use satfusion::config::{parse_override, ExperimentConfig};
use satfusion::runner::{run_pipeline, Variant};

const VARIANTS: [Variant; 4] = [Variant::Full, Variant::NoSat, Variant::NoBatchAdv, Variant::NoTraf];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3);
    let extra = args.map(|a| parse_override(&a)).collect::<Result<Vec<_>, _>>()?;

    let mut composite = vec![0.0; VARIANTS.len()];
    let mut retention = vec![0.0; VARIANTS.len()];
    let mut base = [0.0; 2];
    println!("{:>4} {:<14} {:>10} {:>10} {:>10}", "seed", "variant", "composite", "retention", "utility");
    for seed in 0..seeds {
        let mut overrides = vec![parse_override(&format!("seed={seed}"))?];
        overrides.extend(extra.iter().cloned());
        let cfg = ExperimentConfig::from_toml_with("", &overrides)?;
        let run = run_pipeline(&cfg, &VARIANTS)?;
        base[0] += run.baseline["composite_reward"] / seeds as f64;
        base[1] += run.baseline["retention_probability"] / seeds as f64;
        for (i, v) in VARIANTS.iter().enumerate() {
            let r = &run.variants[v].1;
            composite[i] += r["composite_reward"] / seeds as f64;
            retention[i] += r["retention_probability"] / seeds as f64;
            println!(
                "{seed:>4} {:<14} {:>10.4} {:>10.4} {:>10.4}",
                v.name(),
                r["composite_reward"],
                r["retention_probability"],
                r["utility"]
            );
        }
    }
    println!("\nmeans over {seeds} seeds");
    println!("{:<14} {:>10.4} {:>10.4}", "equal-weights", base[0], base[1]);
    for (i, v) in VARIANTS.iter().enumerate() {
        println!("{:<14} {:>10.4} {:>10.4}", v.name(), composite[i], retention[i]);
    }
    Ok(())
}
