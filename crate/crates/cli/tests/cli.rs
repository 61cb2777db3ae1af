use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use toolsched::harness::tables::read_curve;

const PPO: &str = r#"{"gamma":0.99,"lam":0.95,"clip_eps":0.2,"epochs":2,"minibatch_size":128,"rollout_len":512,
"learning_rate":0.0003,"value_coef":0.5,"entropy_coef":0.01,"total_steps":4096,"n_envs":4,"max_grad_norm":0.5,"hidden":16}"#;

fn toolsched(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toolsched"))
        .args(args)
        .current_dir(dir)
        .env_remove("TOOLSCHED_OUT")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = toolsched(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn unknown_subcommand_prints_usage_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = toolsched(dir.path(), &["fly-to-the-moon"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = toolsched(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(dir.path(), &["--help"]);
    for cmd in ["train", "eval", "compare", "replay", "plot", "scenario"] {
        assert!(stdout.contains(cmd), "help lists {cmd}");
    }
}

#[test]
fn invalid_scenario_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["scenario", "default"]).replace("\"arena_size\": 1000.0", "\"arena_size\": -1.0");
    fs::write(dir.path().join("bad.json"), text).unwrap();
    let out = toolsched(dir.path(), &["scenario", "validate", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("arena_size"));
    let out = toolsched(dir.path(), &["scenario", "validate", "missing.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn train_and_eval_are_bitwise_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("ppo.json"), PPO).unwrap();
    for run in ["a", "b"] {
        ok(d, &["--out", run, "train", "--ppo", "ppo.json", "--seeds", "3,4"]);
        ok(
            d,
            &["--out", run, "eval", "--checkpoint", &format!("{run}/train/proposed"), "--seeds", "3,4", "--episodes", "6", "--traces", "2", "--stochastic"],
        );
    }
    // Parallel training writes the same bytes as sequential training.
    ok(d, &["--out", "c", "train", "--ppo", "ppo.json", "--seeds", "3,4", "--parallel"]);
    let files = [
        "train/proposed/seed-3/checkpoint.json",
        "train/proposed/seed-4/curve.csv",
        "train/proposed/seed-4/checkpoint.json",
        "eval/proposed/report.csv",
        "eval/proposed/episodes.csv",
        "eval/proposed/traces/seed-3/episode-0.jsonl",
        "eval/proposed/traces/seed-4/episode-1.jsonl",
    ];
    for f in files {
        let a = fs::read(d.join("a").join(f)).unwrap_or_else(|e| panic!("{f}: {e}"));
        assert_eq!(a, fs::read(d.join("b").join(f)).unwrap(), "{f} differs between runs");
        if f.starts_with("train") {
            assert_eq!(a, fs::read(d.join("c").join(f)).unwrap(), "{f} differs with --parallel");
        }
    }
}

#[test]
fn shielded_training_has_fewer_early_tool_depletions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("ppo.json"), PPO).unwrap();
    ok(d, &["train", "--ppo", "ppo.json", "--seed", "8", "--shield", "off"]);
    ok(d, &["train", "--ppo", "ppo.json", "--seed", "8", "--shield", "on"]);
    let early = |method: &str| {
        let curve = read_curve(&d.join(format!("out/train/{method}/seed-8/curve.csv"))).unwrap();
        toolsched::harness::run::early_tool_depletions(&curve, 50)
    };
    let (vanilla, proposed) = (early("vanilla-ppo"), early("proposed"));
    assert!(proposed < vanilla, "shielded {proposed} vs unshielded {vanilla}");
}

#[test]
fn output_root_comes_from_env_unless_flag_given() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |extra: &[&str]| {
        let mut args = extra.to_vec();
        args.extend(["eval", "--baseline", "greedy", "--episodes", "2", "--traces", "0"]);
        let out = Command::new(env!("CARGO_BIN_EXE_toolsched"))
            .args(&args)
            .current_dir(d)
            .env("TOOLSCHED_OUT", "from-env")
            .output()
            .unwrap();
        assert!(out.status.success());
    };
    run(&[]);
    assert!(d.join("from-env/eval/greedy/report.csv").exists());
    run(&["--out", "from-flag"]);
    assert!(d.join("from-flag/eval/greedy/report.csv").exists());
}

#[test]
fn replay_and_plot_a_no_tool_episode() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["scenario", "generate", "--standard", "0", "--semantic", "0", "-o", "none.json"]);
    ok(d, &["eval", "--config", "none.json", "--baseline", "greedy", "--episodes", "1", "--traces", "1"]);
    let trace = "out/eval/greedy/traces/seed-0/episode-0.jsonl";
    let replay = ok(d, &["replay", trace]);
    assert!(replay.contains("0 reward mismatches, 0 return mismatches"));
    ok(d, &["plot", "trajectory", trace, "-o", "fig/none.svg"]);
    let svg = fs::read_to_string(d.join("fig/none.svg")).unwrap();
    assert!(svg.contains("stroke-dasharray=\"5,4\""));
    ok(d, &["plot", "trajectory", trace, "-o", "fig/again.svg"]);
    assert_eq!(svg, fs::read_to_string(d.join("fig/again.svg")).unwrap());

    // Break one reward: replay must flag it and exit with the validation code.
    let text = fs::read_to_string(d.join(trace)).unwrap();
    let first = text.lines().next().unwrap();
    let v: serde_json::Value = serde_json::from_str(first).unwrap();
    let reward = v["reward"].as_f64().unwrap();
    let tampered = text.replacen(&format!("\"reward\":{reward}"), &format!("\"reward\":{}", reward + 1.0), 1);
    assert_ne!(tampered, text);
    fs::write(d.join("bad.jsonl"), tampered).unwrap();
    assert_eq!(toolsched(d, &["replay", "bad.jsonl", "--quiet"]).status.code(), Some(2));
}

#[test]
fn compare_and_curves_from_saved_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for b in ["random", "greedy", "costaware"] {
        ok(d, &["eval", "--baseline", b, "--seeds", "1,2", "--episodes", "20", "--traces", "0"]);
    }
    let table = ok(
        d,
        &["compare", "out/eval/random/report.csv", "out/eval/costaware/report.csv", "out/eval/greedy/report.csv"],
    );
    let pos = |m: &str| table.find(&format!(" {m} ")).unwrap();
    assert!(pos("costaware") < pos("greedy") && pos("greedy") < pos("random"));
    assert!(d.join("out/compare/summary.csv").exists());

    fs::write(d.join("ppo.json"), PPO).unwrap();
    ok(d, &["train", "--ppo", "ppo.json", "--seeds", "1,2"]);
    ok(
        d,
        &["plot", "curves", "--baseline", "out/eval/random/report.csv", "--baseline", "out/eval/greedy/report.csv", "--method", "out/train/proposed"],
    );
    let svg = fs::read_to_string(d.join("out/figures/curves.svg")).unwrap();
    assert!(svg.contains(">proposed</text>") && svg.contains(">greedy</text>"));

    let out = toolsched(d, &["compare", "out/eval/random/report.csv"]);
    assert_eq!(out.status.code(), Some(1));
}
