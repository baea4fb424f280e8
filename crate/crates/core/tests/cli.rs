use std::fs;
use std::path::Path;

use satfusion::checkpoint::load_policy;
use satfusion::runner::main_with_args;

const SMALL: [&str; 9] = [
    "--set=data.passes=1",
    "--set=env.users=20",
    "--set=env.train_queries=60",
    "--set=env.heldout_queries=30",
    "--set=drpo.iterations=4",
    "--set=drpo.batch_queries=4",
    "--set=drpo.group_size=4",
    "--set=reward_model.epochs=3",
    "--set=train.checkpoint_every=2",
];

fn run(dir: &Path, seed: u64, cmd: &[&str]) -> i32 {
    let mut args = vec!["satfusion".to_string(), format!("--seed={seed}"), format!("--out-dir={}", dir.display())];
    args.extend(SMALL.iter().map(|s| s.to_string()));
    args.extend(cmd.iter().map(|s| s.to_string()));
    main_with_args(args)
}

fn prepare(dir: &Path, seed: u64) {
    assert_eq!(run(dir, seed, &["gen-data"]), 0);
    assert_eq!(run(dir, seed, &["train-reward-model"]), 0);
}

fn manifest(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn pipeline_writes_policy_checkpoints_reports_and_manifests() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    prepare(dir, 7);
    assert_eq!(run(dir, 7, &["train-policy", "--variant", "no-traf"]), 0);
    assert_eq!(run(dir, 7, &["evaluate", "--variant", "no-traf"]), 0);
    assert_eq!(run(dir, 7, &["report"]), 0);

    for f in [
        "episodes.jsonl",
        "reward_model.bin",
        "reward_model.json",
        "reward_model_loss.jsonl",
        "policy-no-traf.bin",
        "train-no-traf.jsonl",
        "checkpoints/policy-no-traf-00002.bin",
        "eval-no-traf.json",
        "eval-baseline.json",
        "report.csv",
        "report.txt",
    ] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let episodes = fs::read_to_string(dir.join("episodes.jsonl")).unwrap();
    assert_eq!(episodes.lines().count(), 60);
    let trace = fs::read_to_string(dir.join("train-no-traf.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 4);

    let last = load_policy(&dir.join("checkpoints/policy-no-traf-00004.bin")).unwrap();
    assert_eq!(load_policy(&dir.join("policy-no-traf.bin")).unwrap(), last);
    assert!(!last.shape.relation);

    let m = manifest(dir, "manifest-train-policy-no-traf.json");
    assert_eq!(m["subcommand"], "train-policy");
    assert_eq!(m["variant"], "no-traf");
    assert_eq!(m["seed"], 7);
    let hash = m["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    for out in m["outputs"].as_array().unwrap() {
        assert!(dir.join(out.as_str().unwrap()).is_file(), "{out}");
    }
    assert_eq!(manifest(dir, "manifest-gen-data.json")["config_hash"], hash);

    let report = fs::read_to_string(dir.join("report.csv")).unwrap();
    let rows: Vec<&str> = report.lines().skip(1).filter_map(|l| l.split(',').next()).collect();
    assert_eq!(rows, ["baseline", "no-traf"], "{report}");
}

#[test]
fn sweep_writes_one_report_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    prepare(dir, 1);
    assert_eq!(run(dir, 1, &["sweep", "--param", "G", "--values", "2,4,8"]), 0);
    for g in [2, 4, 8] {
        assert!(dir.join(format!("sweep-G/G={g}.json")).is_file());
        assert!(dir.join(format!("sweep-G/G={g}-train.jsonl")).is_file());
    }
    let summary = fs::read_to_string(dir.join("sweep-G/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    let m = manifest(dir, "manifest-sweep-G.json");
    assert_eq!(m["values"], serde_json::json!(["2", "4", "8"]));

    assert_eq!(run(dir, 1, &["sweep", "--param", "alpha", "--values", "0.2,0.8"]), 0);
    assert!(dir.join("sweep-alpha/alpha=0.2.json").is_file());
    assert!(dir.join("sweep-alpha/alpha=0.8.json").is_file());
    assert!(dir.join("sweep-alpha/alpha_sensitivity.json").is_file());
}

#[test]
fn identical_seeds_give_identical_bytes() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, seed) in [(a.path(), 5), (b.path(), 5), (c.path(), 6)] {
        prepare(dir, seed);
        assert_eq!(run(dir, seed, &["train-policy"]), 0);
    }
    for f in ["episodes.jsonl", "reward_model.bin", "reward_model_loss.jsonl", "policy-full.bin", "train-full.jsonl"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert_ne!(
        fs::read(a.path().join("episodes.jsonl")).unwrap(),
        fs::read(c.path().join("episodes.jsonl")).unwrap()
    );
    assert_ne!(
        manifest(a.path(), "manifest-gen-data.json")["config_hash"],
        manifest(c.path(), "manifest-gen-data.json")["config_hash"]
    );
}

#[test]
fn failures_return_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_ne!(run(dir, 0, &["evaluate"]), 0);
    assert_ne!(run(dir, 0, &["train-policy", "--variant", "bogus"]), 0);
    assert_ne!(run(dir, 0, &["--set=drpo.group_size=1", "gen-data"]), 0);
    assert_ne!(run(dir, 0, &["sweep", "--param", "G", "--values", "1"]), 0);
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (dir, threads) in dirs.iter().zip(["1", "4"]) {
        for cmd in [&["gen-data"][..], &["train-reward-model"], &["train-policy"], &["evaluate"]] {
            let status = std::process::Command::new(env!("CARGO_BIN_EXE_satfusion"))
                .env("RAYON_NUM_THREADS", threads)
                .arg("--seed=2")
                .arg(format!("--out-dir={}", dir.path().display()))
                .args(SMALL)
                .args(cmd)
                .stderr(std::process::Stdio::null())
                .status()
                .unwrap();
            assert!(status.success(), "{cmd:?} with {threads} threads");
        }
    }
    for f in ["episodes.jsonl", "reward_model.bin", "policy-full.bin", "train-full.jsonl", "eval-full.json"] {
        assert_eq!(fs::read(dirs[0].path().join(f)).unwrap(), fs::read(dirs[1].path().join(f)).unwrap(), "{f}");
    }
}
