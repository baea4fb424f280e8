//! Experiment pipeline and the command-line front end.
//!
//! The pipeline functions work in memory and are what the examples and tests
//! call. [`run`] wraps them as subcommands that read and write artifacts in
//! an output directory:
//!
//! | subcommand           | reads                         | writes                                       |
//! |----------------------|-------------------------------|----------------------------------------------|
//! | `gen-data`           |                               | `episodes.jsonl`                             |
//! | `train-reward-model` | `episodes.jsonl`              | `reward_model.bin`, `reward_model_loss.jsonl`|
//! | `train-policy`       | `reward_model.bin`            | `policy-<v>.bin`, `train-<v>.jsonl`          |
//! | `evaluate`           | `reward_model.bin`, policy    | `eval-<v>.json/.txt`, `eval-baseline.json/.txt` |
//! | `sweep`              | `episodes.jsonl` or RM        | `sweep-<param>/<param>=<value>.json`, `summary.csv` |
//! | `report`             | `eval-*.json`, `sweep-*/`     | `report.csv`, `report.txt`                   |
//!
//! Every subcommand also writes `manifest-<subcommand>[-<variant>].json`
//! with the resolved config, its hash, the seed and timestamps.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::checkpoint::{load_policy, load_reward_model, save_policy, save_reward_model, write_file};
use crate::config::{parse_override, ExperimentConfig};
use crate::drpo::{train, AdvantageMode, DrpoConfig, IterationMetrics, TrainOutput};
use crate::error::{Error, Result};
use crate::eval::{alpha_sensitivity, evaluate_policy, format_report, EvalContext, FixedWeights, GreedyPolicy, MetricReport};
use crate::fusion::enumerate_feasible;
use crate::policy::PolicyParams;
use crate::rng::SeededRng;
use crate::satisfaction::{train_reward_model, RewardModelParams, SatSample, TrainedRewardModel};
use crate::search::SearchTask;
use crate::simenv::SyntheticEnv;
use crate::types::QueryEpisode;

/// Training variants: the full method and one ablation per component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    /// No satisfaction term in the training reward.
    NoSat,
    /// Group-relative advantages only.
    NoBatchAdv,
    /// No task-relation mixing in the policy.
    NoTraf,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoSat, Variant::NoBatchAdv, Variant::NoTraf];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoSat => "no-sat",
            Variant::NoBatchAdv => "no-batch-adv",
            Variant::NoTraf => "no-traf",
        }
    }

    pub fn drpo(self, base: &DrpoConfig) -> DrpoConfig {
        DrpoConfig {
            advantage_mode: if self == Variant::NoBatchAdv { AdvantageMode::GroupOnly } else { base.advantage_mode },
            ..*base
        }
    }

    pub fn uses_relation(self) -> bool {
        self != Variant::NoTraf
    }

    pub fn uses_satisfaction(self) -> bool {
        self != Variant::NoSat
    }
}

pub fn build_env(cfg: &ExperimentConfig) -> Result<SyntheticEnv> {
    SyntheticEnv::generate(&cfg.env, cfg.satisfaction.beta_q, cfg.seed)
}

/// Logs every training query `data.passes` times, each under a feasible
/// action drawn uniformly at random.
pub fn generate_episodes(cfg: &ExperimentConfig, env: &SyntheticEnv) -> Result<Vec<QueryEpisode>> {
    let space = cfg.action_space()?;
    let feasible = enumerate_feasible(&space)?;
    let root = SeededRng::new(cfg.seed).split("gen-data");
    let jobs: Vec<(usize, usize)> = (0..cfg.data.passes).flat_map(|p| (0..env.train.len()).map(move |q| (p, q))).collect();
    jobs.par_iter()
        .map(|&(p, q)| {
            let mut rng = root.split(&format!("{p}/{q}"));
            let action = &feasible[rng.below(feasible.len())];
            Ok(env.log_episode(&env.train[q], action, &mut rng)?.0)
        })
        .collect()
}

pub fn fit_reward_model(cfg: &ExperimentConfig, episodes: &[QueryEpisode]) -> Result<TrainedRewardModel> {
    let samples = episodes
        .iter()
        .map(|e| {
            e.validate()?;
            SatSample::from_episode(e, &cfg.satisfaction)
        })
        .collect::<Result<Vec<_>>>()?;
    train_reward_model(&samples, &cfg.reward_model, &SeededRng::new(cfg.seed).split("reward-model"))
}

/// Initial policy parameters; identical across variants for a given seed.
pub fn initial_policy(cfg: &ExperimentConfig, variant: Variant) -> Result<PolicyParams> {
    PolicyParams::init(cfg.policy_shape(variant.uses_relation()), &mut SeededRng::new(cfg.seed).split("policy-init"))
}

pub fn train_variant(
    cfg: &ExperimentConfig,
    env: &SyntheticEnv,
    reward_model: Option<&RewardModelParams>,
    variant: Variant,
    on_iteration: impl FnMut(&IterationMetrics, &PolicyParams) -> Result<()>,
) -> Result<TrainOutput> {
    let task = SearchTask {
        env,
        pool: &env.train,
        reward_model: if variant.uses_satisfaction() { reward_model } else { None },
        reward: &cfg.reward,
    };
    if variant.uses_satisfaction() && reward_model.is_none() {
        return Err(Error::Config(format!("variant {} needs a reward model", variant.name())));
    }
    train(
        &task,
        initial_policy(cfg, variant)?,
        &cfg.action_space()?,
        &cfg.action_mode()?,
        &variant.drpo(&cfg.drpo),
        &SeededRng::new(cfg.seed).split("drpo"),
        on_iteration,
    )
}

fn eval_context<'a>(cfg: &'a ExperimentConfig, env: &'a SyntheticEnv, reward_model: &'a RewardModelParams) -> EvalContext<'a> {
    EvalContext {
        env,
        reward_model,
        sat: &cfg.satisfaction,
        reward: &cfg.reward,
    }
}

/// Greedy evaluation of `params` on the held-out pool.
pub fn evaluate_params(cfg: &ExperimentConfig, env: &SyntheticEnv, reward_model: &RewardModelParams, params: &PolicyParams) -> Result<MetricReport> {
    let space = cfg.action_space()?;
    let mode = cfg.action_mode()?;
    let selector = GreedyPolicy { params, space: &space, mode: &mode };
    evaluate_policy(&selector, &env.heldout, &eval_context(cfg, env, reward_model), cfg.seed)
}

/// Equal weights on every task, evaluated like a policy.
pub fn evaluate_baseline(cfg: &ExperimentConfig, env: &SyntheticEnv, reward_model: &RewardModelParams) -> Result<MetricReport> {
    let selector = FixedWeights::uniform(&cfg.action_space()?)?;
    evaluate_policy(&selector, &env.heldout, &eval_context(cfg, env, reward_model), cfg.seed)
}

/// Everything one seed of the experiment produces, in memory.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub env: SyntheticEnv,
    pub reward_model: TrainedRewardModel,
    pub baseline: MetricReport,
    pub variants: BTreeMap<Variant, (TrainOutput, MetricReport)>,
}

/// Data → reward model → each requested variant → evaluation.
pub fn run_pipeline(cfg: &ExperimentConfig, variants: &[Variant]) -> Result<PipelineRun> {
    cfg.validate()?;
    let env = build_env(cfg)?;
    let episodes = generate_episodes(cfg, &env)?;
    let reward_model = fit_reward_model(cfg, &episodes)?;
    let baseline = evaluate_baseline(cfg, &env, &reward_model.params)?;
    let mut out = BTreeMap::new();
    for &v in variants {
        let trained = train_variant(cfg, &env, Some(&reward_model.params), v, |_, _| Ok(()))?;
        let report = evaluate_params(cfg, &env, &reward_model.params, &trained.params)?;
        out.insert(v, (trained, report));
    }
    Ok(PipelineRun {
        env,
        reward_model,
        baseline,
        variants: out,
    })
}

/// `param=value` override for a sweep point. `G` keeps `G · B_q` fixed.
pub fn sweep_overrides(cfg: &ExperimentConfig, param: &str, value: &str) -> Result<Vec<(String, toml::Value)>> {
    let mut out = Vec::new();
    match param {
        "G" | "group_size" => {
            let g: usize = value
                .parse()
                .map_err(|_| Error::invalid("sweep G value", value, "a positive integer"))?;
            if g < 2 {
                return Err(Error::invalid("sweep G value", g, ">= 2"));
            }
            let budget = cfg.drpo.group_size * cfg.drpo.batch_queries;
            out.push(parse_override(&format!("drpo.group_size={g}"))?);
            out.push(parse_override(&format!("drpo.batch_queries={}", (budget / g).max(2)))?);
        }
        "beta_h" | "entropy_coef" => out.push(parse_override(&format!("drpo.entropy_coef={value}"))?),
        "alpha" => out.push(parse_override(&format!("satisfaction.alpha={value}"))?),
        path => out.push(parse_override(&format!("{path}={value}"))?),
    }
    Ok(out)
}

#[derive(Parser, Debug)]
#[command(name = "satfusion", version, about = "Satisfaction-aware fusion-weight policy experiments")]
pub struct Cli {
    /// TOML experiment config; defaults apply to anything it omits.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = "runs")]
    pub out_dir: PathBuf,
    /// Dotted-path override, e.g. `--set drpo.group_size=8`. Repeatable.
    #[arg(long = "set", global = true, value_name = "PATH=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate logged episodes under a random feasible logging policy.
    GenData,
    /// Fit the satisfaction reward model to `episodes.jsonl`.
    TrainRewardModel,
    /// Train a fusion policy.
    TrainPolicy {
        #[arg(long, value_enum, default_value = "full")]
        variant: Variant,
    },
    /// Evaluate a trained policy and the equal-weight baseline on held-out queries.
    Evaluate {
        #[arg(long, value_enum, default_value = "full")]
        variant: Variant,
    },
    /// Train and evaluate once per value of one parameter (`G`, `beta_h`,
    /// `alpha` or any dotted config path).
    Sweep {
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Merge evaluation and sweep metrics into comparison tables.
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::TrainRewardModel => "train-reward-model",
            Command::TrainPolicy { .. } => "train-policy",
            Command::Evaluate { .. } => "evaluate",
            Command::Sweep { .. } => "sweep",
            Command::Report => "report",
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    variant: Option<&'a str>,
    param: Option<&'a str>,
    values: Option<&'a [String]>,
    config_hash: String,
    seed: u64,
    version: &'static str,
    started_at: String,
    finished_at: String,
    outputs: Vec<String>,
    config: &'a ExperimentConfig,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn to_jsonl<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

fn read_episodes(path: &Path) -> Result<Vec<QueryEpisode>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

struct Outputs<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Outputs<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_file(&self.dir.join(name), bytes)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn write_report(&mut self, stem: &str, report: &MetricReport) -> Result<()> {
        self.write(&format!("{stem}.json"), serde_json::to_string_pretty(report)?.as_bytes())?;
        self.write(&format!("{stem}.txt"), format_report(report).as_bytes())
    }
}

/// Parses arguments and runs one subcommand; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut overrides = cli
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    if let Some(seed) = cli.seed {
        overrides.push(("seed".into(), toml::Value::Integer(seed as i64)));
    }
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &overrides)?;
    if let Some(jobs) = cli.jobs {
        // A second call in the same process finds the pool already built.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
    }
    let started_at = now();
    let mut out = Outputs {
        dir: &cli.out_dir,
        written: Vec::new(),
    };
    let dir = cli.out_dir.as_path();
    let mut variant = None;
    let mut sweep = None;
    match &cli.command {
        Command::GenData => {
            let env = build_env(&cfg)?;
            let episodes = generate_episodes(&cfg, &env)?;
            out.write("episodes.jsonl", to_jsonl(&episodes)?.as_bytes())?;
            eprintln!("wrote {} episodes to {}", episodes.len(), dir.join("episodes.jsonl").display());
        }
        Command::TrainRewardModel => {
            let episodes = read_episodes(&dir.join("episodes.jsonl"))?;
            let trained = fit_reward_model(&cfg, &episodes)?;
            save_reward_model(&dir.join("reward_model.bin"), &trained.params, &cfg.satisfaction)?;
            out.written.extend(["reward_model.bin".to_string(), "reward_model.json".to_string()]);
            #[derive(Serialize)]
            struct Epoch {
                epoch: usize,
                weighted_mse: f64,
            }
            let rows: Vec<Epoch> = trained
                .loss_trace
                .iter()
                .enumerate()
                .map(|(epoch, &weighted_mse)| Epoch { epoch, weighted_mse })
                .collect();
            out.write("reward_model_loss.jsonl", to_jsonl(&rows)?.as_bytes())?;
            eprintln!(
                "reward model: weighted MSE {:.5} after {} epochs",
                trained.loss_trace.last().copied().unwrap_or(f64::NAN),
                rows.len()
            );
        }
        Command::TrainPolicy { variant: v } => {
            variant = Some(v.name());
            let env = build_env(&cfg)?;
            let rm = if v.uses_satisfaction() {
                Some(load_reward_model(&dir.join("reward_model.bin"))?.0)
            } else {
                None
            };
            let every = cfg.train.checkpoint_every;
            let mut checkpoints = Vec::new();
            let trained = train_variant(&cfg, &env, rm.as_ref(), *v, |m, params| {
                if every > 0 && (m.iteration + 1) % every == 0 {
                    let name = format!("checkpoints/policy-{}-{:05}.bin", v.name(), m.iteration + 1);
                    save_policy(&dir.join(&name), params)?;
                    checkpoints.push(name);
                }
                if (m.iteration + 1) % 25 == 0 {
                    eprintln!(
                        "[{}] iteration {:>4}  reward {:+.4}  entropy {:.3}  clip {:.3}",
                        v.name(),
                        m.iteration + 1,
                        m.mean_reward,
                        m.mean_entropy,
                        m.clip_fraction
                    );
                }
                Ok(())
            })?;
            out.written.extend(checkpoints);
            let name = format!("policy-{}.bin", v.name());
            save_policy(&dir.join(&name), &trained.params)?;
            out.written.push(name);
            out.write(&format!("train-{}.jsonl", v.name()), to_jsonl(&trained.trace)?.as_bytes())?;
        }
        Command::Evaluate { variant: v } => {
            variant = Some(v.name());
            let env = build_env(&cfg)?;
            let (rm, _) = load_reward_model(&dir.join("reward_model.bin"))?;
            let params = load_policy(&dir.join(format!("policy-{}.bin", v.name())))?;
            let report = evaluate_params(&cfg, &env, &rm, &params)?;
            let baseline = evaluate_baseline(&cfg, &env, &rm)?;
            out.write_report(&format!("eval-{}", v.name()), &report)?;
            out.write_report("eval-baseline", &baseline)?;
            eprint!("{}", format_report(&report));
        }
        Command::Sweep { param, values } => {
            sweep = Some((param.as_str(), values.as_slice()));
            run_sweep(&cfg, cli, param, values, &mut out)?;
        }
        Command::Report => {
            let (csv, text) = build_report(dir)?;
            out.write("report.csv", csv.as_bytes())?;
            out.write("report.txt", text.as_bytes())?;
            eprint!("{text}");
        }
    }
    let manifest = Manifest {
        subcommand: cli.command.name(),
        variant,
        param: sweep.map(|s| s.0),
        values: sweep.map(|s| s.1),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION"),
        started_at,
        finished_at: now(),
        outputs: std::mem::take(&mut out.written),
        config: &cfg,
    };
    let name = match variant {
        Some(v) => format!("manifest-{}-{v}.json", cli.command.name()),
        None => match sweep {
            Some((p, _)) => format!("manifest-sweep-{p}.json"),
            None => format!("manifest-{}.json", cli.command.name()),
        },
    };
    write_file(&dir.join(name), serde_json::to_string_pretty(&manifest)?.as_bytes())
}

fn run_sweep(cfg: &ExperimentConfig, cli: &Cli, param: &str, values: &[String], out: &mut Outputs) -> Result<()> {
    let dir = out.dir.to_path_buf();
    let sub = format!("sweep-{param}");
    let base_overrides: Vec<(String, toml::Value)> = cli
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .chain(cli.seed.map(|s| Ok(("seed".to_string(), toml::Value::Integer(s as i64)))))
        .collect::<Result<_>>()?;
    let text = match &cli.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => String::new(),
    };
    // Validate every point before running any of them.
    let points = values
        .iter()
        .map(|v| {
            let mut ov = base_overrides.clone();
            ov.extend(sweep_overrides(cfg, param, v)?);
            Ok((v.clone(), ExperimentConfig::from_toml_with(&text, &ov)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut summary = String::new();
    if param == "alpha" {
        let episodes = read_episodes(&dir.join("episodes.jsonl"))?;
        let alphas: Vec<f64> = points.iter().map(|(_, c)| c.satisfaction.alpha).collect();
        let result = alpha_sensitivity(&episodes, &alphas, &cfg.satisfaction)?;
        summary.push_str("alpha,rho_gap,rho_retention,composite\n");
        let cell = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        for ((value, _), point) in points.iter().zip(&result.points) {
            out.write(&format!("{sub}/alpha={value}.json"), serde_json::to_string_pretty(point)?.as_bytes())?;
            let _ = writeln!(summary, "{},{},{},{}", point.alpha, cell(point.rho_gap), cell(point.rho_retention), cell(point.composite));
        }
        out.write(&format!("{sub}/alpha_sensitivity.json"), serde_json::to_string_pretty(&result)?.as_bytes())?;
    } else {
        let (rm, _) = load_reward_model(&dir.join("reward_model.bin"))?;
        let mut header_done = false;
        for (value, point_cfg) in &points {
            let env = build_env(point_cfg)?;
            let trained = train_variant(point_cfg, &env, Some(&rm), Variant::Full, |_, _| Ok(()))?;
            let report = evaluate_params(point_cfg, &env, &rm, &trained.params)?;
            out.write(&format!("{sub}/{param}={value}.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
            out.write(&format!("{sub}/{param}={value}-train.jsonl"), to_jsonl(&trained.trace)?.as_bytes())?;
            if !header_done {
                let _ = writeln!(summary, "{param},{}", report.keys().cloned().collect::<Vec<_>>().join(","));
                header_done = true;
            }
            let cells: Vec<String> = report.values().map(|v| format!("{v}")).collect();
            let _ = writeln!(summary, "{value},{}", cells.join(","));
            eprintln!("{param}={value}: composite reward {:+.4}", report["composite_reward"]);
        }
    }
    out.write(&format!("{sub}/summary.csv"), summary.as_bytes())
}

/// Collects `eval-*.json` and `sweep-*/*=*.json` reports into a CSV table
/// (one row per report) and an aligned text table.
pub fn build_report(dir: &Path) -> Result<(String, String)> {
    let mut rows: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let read = |path: &Path| -> Result<Option<BTreeMap<String, f64>>> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text).ok())
    };
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for path in &paths {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        if path.is_file() && name.starts_with("eval-") && name.ends_with(".json") {
            if let Some(r) = read(path)? {
                rows.insert(name.trim_start_matches("eval-").trim_end_matches(".json").to_string(), r);
            }
        } else if path.is_dir() && name.starts_with("sweep-") {
            let mut inner: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| Error::io(path, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .collect();
            inner.sort();
            for p in inner {
                let stem = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                if stem.contains('=') && stem.ends_with(".json") {
                    if let Some(r) = read(&p)? {
                        rows.insert(format!("{name}/{}", stem.trim_end_matches(".json")), r);
                    }
                }
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::MissingArtifact(dir.join("eval-*.json")));
    }
    let mut columns: Vec<String> = rows.values().flat_map(|r| r.keys().cloned()).collect();
    columns.sort();
    columns.dedup();
    let mut csv = format!("run,{}\n", columns.join(","));
    for (name, r) in &rows {
        let cells: Vec<String> = columns.iter().map(|c| r.get(c).map_or(String::new(), |v| format!("{v}"))).collect();
        let _ = writeln!(csv, "{name},{}", cells.join(","));
    }
    let name_width = rows.keys().map(String::len).max().unwrap_or(3).max(3);
    let widths: Vec<usize> = columns.iter().map(|c| c.len().max(10)).collect();
    let mut text = format!("{:<name_width$}", "run");
    for (c, w) in columns.iter().zip(&widths) {
        let _ = write!(text, "  {c:>w$}");
    }
    text.push('\n');
    for (name, r) in &rows {
        let _ = write!(text, "{name:<name_width$}");
        for (c, w) in columns.iter().zip(&widths) {
            match r.get(c) {
                Some(v) => {
                    let _ = write!(text, "  {v:>w$.4}");
                }
                None => {
                    let _ = write!(text, "  {:>w$}", "-");
                }
            }
        }
        text.push('\n');
    }
    Ok((csv, text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_switches() {
        let base = DrpoConfig::default();
        assert_eq!(Variant::NoBatchAdv.drpo(&base).advantage_mode, AdvantageMode::GroupOnly);
        assert_eq!(Variant::Full.drpo(&base).advantage_mode, AdvantageMode::Dual);
        assert!(!Variant::NoTraf.uses_relation());
        assert!(!Variant::NoSat.uses_satisfaction());
        assert!(Variant::NoBatchAdv.uses_relation() && Variant::NoBatchAdv.uses_satisfaction());
    }

    #[test]
    fn group_sweep_keeps_budget() {
        let cfg = ExperimentConfig::default();
        let budget = cfg.drpo.group_size * cfg.drpo.batch_queries;
        for g in [2, 4, 8, 16, 32] {
            let ov = sweep_overrides(&cfg, "G", &g.to_string()).unwrap();
            let c = ExperimentConfig::from_toml_with("", &ov).unwrap();
            assert_eq!(c.drpo.group_size, g);
            assert_eq!(c.drpo.group_size * c.drpo.batch_queries, budget);
        }
        assert!(sweep_overrides(&cfg, "G", "1").is_err());
        assert!(sweep_overrides(&cfg, "G", "x").is_err());
    }

    #[test]
    fn cli_parses_spec_flags() {
        let cli = Cli::try_parse_from([
            "satfusion", "train-policy", "--variant", "no-batch-adv", "--config", "c.toml", "--seed", "3", "--out-dir", "o", "--jobs", "2",
        ])
        .unwrap();
        assert!(matches!(cli.command, Command::TrainPolicy { variant: Variant::NoBatchAdv }));
        assert_eq!(cli.seed, Some(3));
        let cli = Cli::try_parse_from(["satfusion", "sweep", "--param", "G", "--values", "2,4,8"]).unwrap();
        match cli.command {
            Command::Sweep { param, values } => {
                assert_eq!(param, "G");
                assert_eq!(values, vec!["2", "4", "8"]);
            }
            _ => panic!("expected sweep"),
        }
        assert!(Cli::try_parse_from(["satfusion", "frobnicate"]).is_err());
        assert!(Cli::try_parse_from(["satfusion", "train-policy", "--variant", "half"]).is_err());
    }
}
