mod common;

use slatesim::config::ExperimentConfig;
use slatesim::sim::{Checkpoint, Simulation};

const TABULAR: &str = r#"{
  "env": {"kind": "latent_bandit", "episode_length": 25},
  "agent": {"type": "tabular_q", "discount": 0, "features": [
    {"name": "history/0/slate_topic/0", "low": 0, "high": 10, "bins": 10},
    {"name": "history/0/choice", "low": -1, "high": 1, "bins": 2}]},
  "layers": [{"type": "fixed_length_history", "window": 1}],
  "sim": {"seed": 11, "num_train_iterations": 4, "turns_per_iteration": 100, "num_eval_episodes": 6,
          "log_train_episodes": true}
}"#;

fn config() -> ExperimentConfig {
    ExperimentConfig::from_json(TABULAR).unwrap()
}

fn iterations(sim: &mut Simulation, n: usize) -> Vec<u8> {
    let mut log = Vec::new();
    for _ in 0..n {
        sim.run_iteration(Some(&mut log)).unwrap();
    }
    log
}

fn eval_log(sim: &Simulation, cfg: &ExperimentConfig) -> (Vec<u8>, String) {
    let mut log = Vec::new();
    let row = sim.evaluate(&cfg.build_eval_env(None), Some(&mut log)).unwrap();
    (log, row.csv_line())
}

#[test]
fn same_config_gives_identical_bytes() {
    let cfg = config();
    let mut a = cfg.simulation();
    let mut b = cfg.simulation();
    assert_eq!(iterations(&mut a, 4), iterations(&mut b, 4));
    assert_eq!(eval_log(&a, &cfg), eval_log(&b, &cfg));
}

#[test]
fn different_seeds_diverge() {
    let cfg = config();
    let mut other = cfg.clone();
    other.sim.seed += 1;
    assert_ne!(iterations(&mut cfg.simulation(), 1), iterations(&mut other.simulation(), 1));
}

#[test]
fn checkpoint_round_trip_resumes_exactly() {
    let cfg = config();
    let mut straight = cfg.simulation();
    let mut head = iterations(&mut straight, 2);
    let tail = iterations(&mut straight, 2);
    head.extend(&tail);

    let mut first = cfg.simulation();
    iterations(&mut first, 2);
    let bytes = first.checkpoint().to_bytes();
    let restored = Checkpoint::from_bytes(&bytes, &first.agent().kind()).unwrap();
    assert_eq!(restored.to_bytes(), bytes);

    let mut resumed = cfg.simulation();
    resumed.restore(&restored).unwrap();
    assert_eq!(resumed.progress(), first.progress());
    assert_eq!(iterations(&mut resumed, 2), tail);
    assert_eq!(eval_log(&resumed, &cfg), eval_log(&straight, &cfg));
}

#[test]
fn checkpoint_survives_the_filesystem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    let cfg = config();
    let mut sim = cfg.simulation();
    iterations(&mut sim, 1);
    sim.save_checkpoint(&path).unwrap();
    let mut fresh = cfg.simulation();
    fresh.restore_from(&path).unwrap();
    assert_eq!(fresh.agent_digest(), sim.agent_digest());
}

#[test]
fn evaluation_leaves_the_agent_untouched() {
    let cfg = config();
    let mut sim = cfg.simulation();
    iterations(&mut sim, 2);
    let before = sim.agent_digest();
    let progress = sim.progress();
    let first = eval_log(&sim, &cfg);
    assert_eq!(sim.agent_digest(), before);
    assert_eq!(sim.progress(), progress);
    assert_eq!(eval_log(&sim, &cfg), first);
}

#[test]
fn worker_count_does_not_change_evaluation() {
    let cfg = config();
    let mut sim = cfg.simulation();
    iterations(&mut sim, 1);
    let ckpt = sim.checkpoint();
    let mut logs = Vec::new();
    for workers in [1, 3, 8] {
        let mut c = cfg.clone();
        c.sim.parallel_eval_workers = workers;
        let mut s = c.simulation();
        s.restore(&ckpt).unwrap();
        logs.push(eval_log(&s, &c));
    }
    assert_eq!(logs[0], logs[1]);
    assert_eq!(logs[0], logs[2]);
}
