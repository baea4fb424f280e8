//! How the gap/retention balance `α` of the satisfaction reward trades off
//! its correlation with each ingredient, on freshly logged episodes.
//!
//! ```text
//! cargo run --release --example alpha_sensitivity -- [seed] [key=value ...]
//! ```

use satfusion::config::{parse_override, ExperimentConfig};
use satfusion::eval::alpha_sensitivity;
use satfusion::runner::{build_env, generate_episodes};

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
    let retained = episodes.iter().filter(|e| e.retained).count();
    let reformulated = episodes.iter().filter(|e| e.reformulated).count();
    println!(
        "{} episodes: {retained} retained, {reformulated} reformulated\n",
        episodes.len()
    );
    let sweep = alpha_sensitivity(&episodes, &cfg.sweep.alphas, &cfg.satisfaction)?;
    let show = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"));
    println!("{:>5} {:>10} {:>10} {:>10}", "alpha", "rho(gap)", "rho(ret)", "sum");
    for p in &sweep.points {
        println!(
            "{:>5.2} {:>10} {:>10} {:>10}",
            p.alpha,
            show(p.rho_gap),
            show(p.rho_retention),
            show(p.composite)
        );
    }
    println!("\nbest alpha: {}", show(sweep.best_alpha));
    Ok(())
}
