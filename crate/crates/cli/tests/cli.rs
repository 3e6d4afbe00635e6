use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const MINIMAL: &str = r#"{
  "env": {"kind": "latent_bandit", "episode_length": 20},
  "agent": {"type": "ucb1"},
  "layers": [{"type": "cluster_click_stats"}],
  "sim": {"seed": 3, "num_train_iterations": 3, "turns_per_iteration": 40, "num_eval_episodes": 4}
}"#;

fn slatesim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slatesim"))
        .args(args)
        .env_remove("SLATESIM_OUT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_metrics_logs_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", MINIMAL);
    let out = dir.path().join("out");
    let o = slatesim(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let rows = slatesim::sim::parse_metrics_csv(&metrics).unwrap();
    assert_eq!(rows.len(), 3);
    for f in ["train.jsonl", "eval.jsonl", "checkpoint.json", "eval_metrics.csv", "result.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn missing_config_exits_one_and_names_the_path() {
    let o = slatesim(&["run", "--config", "/nonexistent/exp.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/nonexistent/exp.json"));
}

#[test]
fn invalid_config_reports_the_json_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = MINIMAL.replace(r#""turns_per_iteration": 40"#, r#""turns_per_iteration": 0"#);
    let cfg = write_config(dir.path(), "bad.json", &bad);
    let o = slatesim(&["run", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sim.turns_per_iteration"), "{}", stderr(&o));
}

#[test]
fn runtime_error_exits_two_with_episode_context() {
    let dir = tempfile::tempdir().unwrap();
    // identity weights go negative for disliked topics
    let text = r#"{
      "env": {"kind": "latent_bandit", "choice": {"kind": "conditional", "score_fn": {"type": "identity"}, "null_score": 1.0}},
      "agent": {"type": "random"},
      "sim": {"num_train_iterations": 1, "turns_per_iteration": 500}
    }"#;
    let cfg = write_config(dir.path(), "c.json", text);
    let o = slatesim(&["run", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("episode 0, turn"), "{}", stderr(&o));
}

#[test]
fn corrupt_checkpoint_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", MINIMAL);
    fs::write(dir.path().join("checkpoint.json"), "{\"format_version\": 1").unwrap();
    let o = slatesim(&["eval", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("corrupt"), "{}", stderr(&o));
}

#[test]
fn seed_override_changes_output_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", MINIMAL);
    let log = |name: &str, seed: Option<&str>| {
        let out = dir.path().join(name);
        let mut args = vec!["run", "--config", s(&cfg), "--out", s(&out)];
        if let Some(seed) = seed {
            args.extend(["--seed", seed]);
        }
        let o = slatesim(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("train.jsonl")).unwrap()
    };
    let base = log("a", None);
    let seeded = log("b", Some("99"));
    let again = log("c", Some("99"));
    assert_ne!(base, seeded);
    assert_eq!(seeded, again);
}

#[test]
fn out_dir_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", MINIMAL);
    let out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_slatesim"))
        .args(["run", "--config", s(&cfg)])
        .env("SLATESIM_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("metrics.csv").exists());
}

#[test]
fn eval_matches_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", MINIMAL);
    let out = dir.path().join("out");
    assert!(slatesim(&["run", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let mut logs = Vec::new();
    for w in ["1", "8"] {
        let o = slatesim(&["eval", "--config", s(&cfg), "--out", s(&out), "--workers", w]);
        assert!(o.status.success(), "{}", stderr(&o));
        logs.push((
            fs::read(out.join("eval.jsonl")).unwrap(),
            fs::read(out.join("eval_metrics.csv")).unwrap(),
        ));
    }
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn eval_override_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", MINIMAL);
    // a null score this high makes clicks vanishingly rare
    let ov = write_config(
        dir.path(),
        "ov.json",
        r#"{"choice": {"kind": "conditional", "null_score": 60.0}}"#,
    );
    let out = dir.path().join("out");
    let o = slatesim(&["run", "--config", s(&cfg), "--out", s(&out), "--eval-override", s(&ov)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["ctr"], 0.0);

    let bad = write_config(dir.path(), "bad.json", r#"{"choice": {"kind": "nope"}}"#);
    let o = slatesim(&["run", "--config", s(&cfg), "--out", s(&out), "--eval-override", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn replay_matches_metrics_and_flags_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", MINIMAL.replace("\"num_train_iterations\": 3", "\"num_train_iterations\": 1").as_str());
    let out = dir.path().join("out");
    assert!(slatesim(&["run", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let log = out.join("train.jsonl");
    let o = slatesim(&["replay", s(&log), "--config", s(&out.join("config.json"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let episodes: Vec<f64> = stdout
        .lines()
        .filter(|l| l.starts_with("episode"))
        .map(|l| l.rsplit(' ').next().unwrap().parse().unwrap())
        .collect();
    // 40 turns of 20-turn episodes
    assert_eq!(episodes.len(), 2);
    let rows = slatesim::sim::parse_metrics_csv(&fs::read_to_string(out.join("metrics.csv")).unwrap()).unwrap();
    let mean = episodes.iter().sum::<f64>() / episodes.len() as f64;
    assert!((mean - rows[0].avg_reward).abs() < 1e-9);

    let text = fs::read_to_string(&log).unwrap();
    let corrupted = text.replacen("\"reward\":", "\"reward\":\"x\",\"was\":", 1);
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, corrupted).unwrap();
    let o = slatesim(&["replay", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stdout).unwrap().contains("line 2:"));
}

#[test]
fn summarize_prints_lift_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    for (name, strategy, ctr) in [("r", "Random", 0.10), ("u", "UCB1", 0.20)] {
        let d = dir.path().join(name);
        fs::create_dir(&d).unwrap();
        fs::write(
            d.join("result.json"),
            format!(r#"{{"strategy":"{strategy}","environment":"High Topic Affinity","ctr":{ctr}}}"#),
        )
        .unwrap();
    }
    let o = slatesim(&["summarize", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout).unwrap().contains("20.00 (100.00%)"));
    assert!(dir.path().join("summary.csv").exists());

    fs::remove_dir_all(dir.path().join("r")).unwrap();
    let o = slatesim(&["summarize", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Random"));
}

#[test]
fn summarize_of_a_run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", MINIMAL);
    let random = write_config(dir.path(), "r.json", &MINIMAL.replace(r#"{"type": "ucb1"}"#, r#"{"type": "random"}"#));
    let mut tables = Vec::new();
    for round in ["one", "two"] {
        let root = dir.path().join(round);
        for (name, c) in [("ucb1", &cfg), ("random", &random)] {
            let out = root.join(name);
            let o = slatesim(&["run", "--config", s(c), "--out", s(&out)]);
            assert!(o.status.success(), "{}", stderr(&o));
        }
        let o = slatesim(&["summarize", s(&root)]);
        assert!(o.status.success(), "{}", stderr(&o));
        tables.push(o.stdout);
    }
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn packaged_configs_validate() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        slatesim::config::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 14);
}
