//! Harness shared by the integration and acceptance tests: hand-written
//! oracles and small drivers that work against the public API only.

#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use rand::Rng;
use slatesim::agents::{
    Agent, AgentStep, FeatureBins, LearningRate, QConfig, RandomAgent, TabularQAgent, Ucb1Agent,
};
use slatesim::choice::{choice_distribution, ChoiceConfig, ChoiceKind, ScoreFn, Squash};
use slatesim::config::ExperimentConfig;
use slatesim::envs::{Environment, InterestEvolutionConfig, LatentBanditConfig};
use slatesim::error::{AgentError, CheckpointError};
use slatesim::layers::{ClusterClickStats, TemporalAggregation};
use slatesim::rng::{self, Phase, SimRng, Stream};
use slatesim::sim::{run_episode, EpisodeId, LogContext};
use slatesim::types::{
    DocObservation, Observation, Response, Slate, TopicVector, UserObservation, UserState,
};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

pub fn load_config(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&config_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Trains the configured agent and returns its evaluation CTR.
pub fn train_eval_ctr(cfg: &ExperimentConfig) -> f64 {
    let mut sim = cfg.simulation();
    sim.train(None).expect("training");
    let env = cfg.build_eval_env(None);
    sim.evaluate(&env, None).expect("evaluation").ctr
}

/// Steps one episode by hand so the test can inspect the latent state.
/// `visit(before, after, turn)` sees every transition.
pub fn drive(
    env: &mut Environment,
    agent: &mut dyn Agent,
    seed: u64,
    mut visit: impl FnMut(&UserState, &UserState, usize),
) -> usize {
    let mut env_rng = rng::stream(seed, Stream::Environment);
    let mut agent_rng = rng::stream(seed, Stream::Agent);
    env.reset(&mut env_rng);
    agent.begin_episode();
    if agent.needs_document_oracle() {
        agent.provide_document_oracle(env.corpus());
    }
    let mut obs = env.observe(None);
    let mut t = 0;
    loop {
        let step = agent.step(&obs, &mut agent_rng).expect("agent step");
        let docs = env.slate_documents(&step.slate);
        let response = env
            .responses
            .respond(env.user_state(), &docs, &mut env_rng)
            .expect("response");
        let reward = env.reward.reward(&response);
        let before = env.user_state().clone();
        let after = env.users.transition(&before, &docs, &response, &mut env_rng);
        visit(&before, &after, t);
        env.set_user_state(after);
        t += 1;
        let done = env.is_terminal(t);
        obs = env.observe(Some(&response));
        agent.update(&obs, reward, done).expect("agent update");
        if done {
            return t;
        }
    }
}

// ---- two-state deterministic chain ----------------------------------------

pub const CHAIN_GAMMA: f64 = 0.9;

/// Action `a` moves to state `a`. Staying in state 1 pays 1, returning to
/// state 0 pays 0.2, moving from 0 to 1 pays nothing.
pub const CHAIN_REWARD: [[f64; 2]; 2] = [[0.2, 0.0], [0.2, 1.0]];

/// Q* by value iteration to a fixed point.
pub fn chain_value_iteration() -> [[f64; 2]; 2] {
    let mut q = [[0.0_f64; 2]; 2];
    loop {
        let v = [q[0][0].max(q[0][1]), q[1][0].max(q[1][1])];
        let mut next = [[0.0; 2]; 2];
        let mut delta: f64 = 0.0;
        for s in 0..2 {
            for a in 0..2 {
                next[s][a] = CHAIN_REWARD[s][a] + CHAIN_GAMMA * v[a];
                delta = delta.max((next[s][a] - q[s][a]).abs());
            }
        }
        q = next;
        if delta < 1e-12 {
            return q;
        }
    }
}

/// Observation of chain state `s`: a `state` feature and one document per
/// action, the action being the document's topic.
pub fn chain_obs(s: usize) -> Observation {
    let mut user = UserObservation::default();
    user.features.insert("state".into(), s as f64);
    Observation {
        user_observable: user,
        doc_observables: (0..2)
            .map(|a| DocObservation {
                id: a,
                topics: Some(TopicVector::one_hot(2, a as usize).entries().to_vec()),
                length: None,
                quality: None,
            })
            .collect(),
        last_response: None,
        augmentations: Default::default(),
    }
}

pub fn chain_q_config() -> QConfig {
    QConfig {
        discount: CHAIN_GAMMA,
        learning_rate: LearningRate::Constant { rate: 0.1 },
        epsilon: 0.3,
        features: Some(vec![FeatureBins::new("state", 0.0, 2.0, 2)]),
        ..QConfig::default()
    }
}

/// Runs `steps` transitions of the chain and reads back the learned Q table.
pub fn chain_learned_q(agent: &mut TabularQAgent, steps: usize, seed: u64) -> [[f64; 2]; 2] {
    let mut rng = rng::seeded(seed);
    agent.set_training(true);
    agent.begin_episode();
    let mut s = 0;
    for _ in 0..steps {
        let step = agent.step(&chain_obs(s), &mut rng).expect("step");
        let a = step.slate.items[0] as usize;
        let next = a;
        agent
            .update(&chain_obs(next), CHAIN_REWARD[s][a], false)
            .expect("update");
        s = next;
    }
    let mut q = [[0.0; 2]; 2];
    for (s, row) in q.iter_mut().enumerate() {
        let key = agent.state_key(&chain_obs(s));
        for (a, v) in row.iter_mut().enumerate() {
            *v = agent.table().get(&key, &[a as u32]);
        }
    }
    q
}

pub fn max_abs_diff(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

// ---- two-armed Bernoulli bandit ---------------------------------------------

/// Fraction of pulls UCB1 (behind click statistics) gives to the better arm.
pub fn ucb1_best_arm_fraction(probs: [f64; 2], steps: usize, seed: u64) -> f64 {
    let mut agent = ClusterClickStats::new(Box::new(Ucb1Agent::new(1)), 2, false);
    agent.begin_episode();
    let mut rng = rng::seeded(seed);
    let best = if probs[0] >= probs[1] { 0 } else { 1 };
    let mut obs = chain_obs(0);
    let mut best_pulls = 0;
    for _ in 0..steps {
        let step = agent.step(&obs, &mut rng).expect("step");
        let arm = step.slate.items[0] as usize;
        best_pulls += usize::from(arm == best);
        let clicked = rng.random::<f64>() < probs[arm];
        let response = if clicked {
            Response {
                chosen_index: Some(0),
                engagement: 1.0,
                revealed_quality: None,
            }
        } else {
            Response::no_click()
        };
        obs = chain_obs(0);
        obs.last_response = Some(response);
        agent
            .update(&obs, f64::from(u8::from(clicked)), false)
            .expect("update");
    }
    best_pulls as f64 / steps as f64
}

// ---- choice models ----------------------------------------------------------

/// A random configuration of one of the three choice kinds.
pub fn random_choice_config(rng: &mut SimRng, kind: ChoiceKind) -> ChoiceConfig {
    let null = (rng.random::<f64>() < 0.8).then(|| rng.random_range(-5.0..5.0));
    match kind {
        ChoiceKind::Logit => ChoiceConfig::logit().with_null(null),
        ChoiceKind::Conditional => {
            let f = match rng.random_range(0..3) {
                0 => ScoreFn::Exp,
                1 => ScoreFn::Identity,
                _ => ScoreFn::Affine {
                    scale: rng.random_range(0.1..3.0),
                    offset: 10.0,
                },
            };
            ChoiceConfig::conditional(f).with_null(null.map(f64::abs))
        }
        ChoiceKind::Cascade => {
            let squash = if rng.random() { Squash::Logistic } else { Squash::Clip };
            ChoiceConfig::cascade(rng.random_range(0.05..=1.0), squash)
        }
    }
}

/// Draws `n` random score triples across all three kinds and returns the
/// first distribution that is not a probability vector, if any.
pub fn choice_fuzz(n: usize, seed: u64) -> Result<(), String> {
    let mut rng = rng::seeded(seed);
    let kinds = [ChoiceKind::Conditional, ChoiceKind::Logit, ChoiceKind::Cascade];
    for i in 0..n {
        let kind = kinds[i % 3];
        let cfg = random_choice_config(&mut rng, kind);
        // identity and affine transforms need non-negative weights
        let positive = kind == ChoiceKind::Conditional;
        let scores: Vec<f64> = (0..3)
            .map(|_| {
                if positive {
                    rng.random_range(0.0..5.0)
                } else {
                    rng.random_range(-20.0..20.0)
                }
            })
            .collect();
        let dist = choice_distribution(&scores, &cfg).map_err(|e| format!("{cfg:?}: {e}"))?;
        let sum: f64 = dist.iter().sum();
        if dist.len() != 4 || (sum - 1.0).abs() > 1e-9 || dist.iter().any(|&p| p.is_nan() || p < 0.0) {
            return Err(format!("{cfg:?} {scores:?} -> {dist:?}"));
        }
    }
    Ok(())
}

// ---- interest evolution -----------------------------------------------------

#[derive(Debug, Default)]
pub struct FuzzReport {
    pub steps: usize,
    pub episodes: usize,
    pub longest: usize,
}

/// Random slates through interest-evolution users under a few parameter
/// settings until `steps` transitions have been checked.
pub fn interest_evolution_fuzz(steps: usize, seed: u64) -> Result<FuzzReport, String> {
    let variants = [
        InterestEvolutionConfig::default(),
        InterestEvolutionConfig {
            nudge_fraction: 0.9,
            positive_nudge_prob: 0.5,
            bonus_coefficient: 0.9,
            ..InterestEvolutionConfig::default()
        },
        InterestEvolutionConfig {
            one_hot_topics: false,
            doc_length: 1.5,
            initial_budget: 60.0,
            episode_length: 50,
            ..InterestEvolutionConfig::default()
        },
    ];
    let mut report = FuzzReport::default();
    let mut episode = 0;
    while report.steps < steps {
        let cfg = &variants[episode % variants.len()];
        let mut env = cfg.build(seed);
        let mut agent = RandomAgent::new(cfg.slate_size);
        let bound = (cfg.initial_budget / (cfg.doc_length * (1.0 - cfg.bonus_coefficient))).ceil()
            as usize
            + cfg.episode_length;
        let mut failure = None;
        let episode_seed = rng::episode_seed(seed, Phase::Train, episode as u64);
        let turns = drive(&mut env, &mut agent, episode_seed, |before, after, t| {
            if failure.is_some() {
                return;
            }
            if let Some(x) = after.interests.entries().iter().find(|x| !(-1.0..=1.0).contains(*x)) {
                failure = Some(format!("episode {episode} turn {t}: interest {x}"));
            } else if after.budget > before.budget {
                failure = Some(format!(
                    "episode {episode} turn {t}: budget rose {} -> {}",
                    before.budget, after.budget
                ));
            }
        });
        if let Some(f) = failure {
            return Err(f);
        }
        if turns > bound {
            return Err(format!("episode {episode} ran {turns} turns, bound {bound}"));
        }
        report.steps += turns;
        report.longest = report.longest.max(turns);
        report.episodes += 1;
        episode += 1;
    }
    Ok(report)
}

// ---- scripted agent ---------------------------------------------------------

#[derive(Debug, Default)]
pub struct Calls {
    pub steps: usize,
    pub rewards: Vec<f64>,
}

/// Recommends candidate `n mod m` on its n-th call and records what it sees.
#[derive(Clone, Debug)]
pub struct Scripted {
    pub calls: Arc<Mutex<Calls>>,
    n: usize,
}

impl Scripted {
    pub fn new() -> (Self, Arc<Mutex<Calls>>) {
        let calls = Arc::new(Mutex::new(Calls::default()));
        (
            Self {
                calls: calls.clone(),
                n: 0,
            },
            calls,
        )
    }
}

impl Agent for Scripted {
    fn kind(&self) -> String {
        "scripted".into()
    }

    fn step(&mut self, obs: &Observation, _rng: &mut SimRng) -> Result<AgentStep, AgentError> {
        let ids = obs.candidate_ids();
        let id = ids[self.n % ids.len()];
        self.n += 1;
        self.calls.lock().unwrap().steps += 1;
        Ok(AgentStep::new(Slate::new(vec![id])))
    }

    fn update(&mut self, _next: &Observation, reward: f64, _done: bool) -> Result<(), AgentError> {
        self.calls.lock().unwrap().rewards.push(reward);
        Ok(())
    }

    fn set_training(&mut self, _training: bool) {}

    fn save_state(&self) -> serde_json::Value {
        serde_json::Value::Null
    }

    fn load_state(&mut self, _state: &serde_json::Value) -> Result<(), CheckpointError> {
        Ok(())
    }

    fn box_clone(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }
}

#[derive(Debug)]
pub struct AggregationRun {
    pub base_steps: usize,
    pub base_reward: f64,
    pub env_reward: f64,
    /// Emitted slates whose topic multiset differs from the previous one,
    /// counted from the episode log.
    pub logged_switches: usize,
    pub turns: usize,
}

/// One scripted episode of `turns` turns behind temporal aggregation.
pub fn temporal_aggregation_run(turns: usize, period: usize, switching_cost: f64, seed: u64) -> AggregationRun {
    let cfg = LatentBanditConfig {
        episode_length: turns,
        ..LatentBanditConfig::default()
    };
    let mut env = cfg.build(seed);
    let (base, calls) = Scripted::new();
    let mut agent = TemporalAggregation::new(Box::new(base), period, switching_cost);
    let id = EpisodeId {
        master_seed: seed,
        phase: Phase::Train,
        index: 0,
    };
    let outcome = run_episode(&mut env, &mut agent, id, &LogContext::default(), true).expect("episode");
    let log = outcome.log.expect("recorded");
    let mut logged_switches = 0;
    let mut previous: Option<Vec<usize>> = None;
    for turn in &log.turns {
        let mut topics: Vec<usize> = turn
            .slate
            .iter()
            .map(|&id| {
                let d = turn.obs.doc_observables.iter().find(|d| d.id == id).expect("logged doc");
                let t = d.topics.as_ref().expect("observable topics");
                (0..t.len()).fold(0, |best, i| if t[i] > t[best] { i } else { best })
            })
            .collect();
        topics.sort_unstable();
        if previous.as_ref().is_some_and(|p| *p != topics) {
            logged_switches += 1;
        }
        previous = Some(topics);
    }
    let calls = calls.lock().unwrap();
    AggregationRun {
        base_steps: calls.steps,
        base_reward: calls.rewards.iter().sum(),
        env_reward: log.cumulative_reward(),
        logged_switches,
        turns: log.turns.len(),
    }
}

// ---- choc-kale --------------------------------------------------------------

/// Mean end-of-episode satisfaction over `episodes` evaluation episodes of the
/// configured agent, and the initial satisfaction.
pub fn mean_final_satisfaction(cfg: &ExperimentConfig, episodes: u64) -> (f64, f64) {
    let mut env = cfg.build_eval_env(None);
    let mut agent = cfg.build_agent(&env);
    agent.set_training(false);
    let mut total = 0.0;
    let mut initial = f64::NAN;
    for i in 0..episodes {
        let seed = rng::episode_seed(cfg.sim.seed, Phase::Eval, i);
        let mut last = f64::NAN;
        drive(&mut env, agent.as_mut(), seed, |before, after, t| {
            if t == 0 {
                initial = before.satisfaction;
            }
            last = after.satisfaction;
        });
        total += last;
    }
    (initial, total / episodes as f64)
}
