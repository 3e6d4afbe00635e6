//! Browser bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers and returns numbers or a JSON string,
//! so the page needs no bundler.

use serde::Serialize;
use slatesim::choice::{choice_distribution, ChoiceConfig, ScoreFn, Squash};
use slatesim::config::ExperimentConfig;
use slatesim::envs::{InterestEvolutionConfig, UserPrior};
use slatesim::rng;
use slatesim::types::{Document, Response, TopicVector};
use wasm_bindgen::prelude::*;

/// Choice probabilities for `scores` followed by the no-click outcome.
pub fn choice_probabilities_impl(
    kind: &str,
    scores: &[f64],
    null_score: f64,
    attention: f64,
) -> Result<Vec<f64>, String> {
    let cfg = match kind {
        "logit" => ChoiceConfig::logit().with_null(Some(null_score)),
        "conditional" => ChoiceConfig::conditional(ScoreFn::Exp).with_null(Some(null_score)),
        "cascade" => ChoiceConfig::cascade(attention, Squash::Logistic),
        other => return Err(format!("unknown choice model {other:?}")),
    };
    cfg.validate("choice").map_err(|e| e.to_string())?;
    choice_distribution(scores, &cfg).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn choice_probabilities(
    kind: &str,
    scores: Vec<f64>,
    null_score: f64,
    attention: f64,
) -> Result<Vec<f64>, JsError> {
    choice_probabilities_impl(kind, &scores, null_score, attention).map_err(|e| JsError::new(&e))
}

#[derive(Debug, Serialize)]
pub struct Trajectory {
    pub interest: Vec<f64>,
    pub budget: Vec<f64>,
}

/// A user with interest `initial` in topic 0 who clicks a topic-0 document
/// every turn until the budget runs out.
pub fn interest_trajectory_impl(
    seed: u64,
    initial: f64,
    nudge_fraction: f64,
    positive_nudge_prob: f64,
) -> Result<Trajectory, String> {
    let cfg = InterestEvolutionConfig {
        num_topics: 2,
        nudge_fraction,
        positive_nudge_prob,
        user_prior: UserPrior::PointMass {
            interests: vec![initial, 0.0],
        },
        ..InterestEvolutionConfig::default()
    };
    cfg.validate("env").map_err(|e| e.to_string())?;
    let env = cfg.build(seed);
    let mut rng = rng::seeded(seed);
    let mut state = env.users.sample_user(&mut rng);
    let doc = Document {
        id: 0,
        topics: TopicVector::one_hot(2, 0),
        length: cfg.doc_length,
        quality: 0.0,
        observable_quality: None,
    };
    let click = Response {
        chosen_index: Some(0),
        engagement: cfg.doc_length,
        revealed_quality: None,
    };
    let mut out = Trajectory {
        interest: vec![state.interests.entries()[0]],
        budget: vec![state.budget],
    };
    let mut step = 0;
    while !env.users.is_terminal(&state, step) {
        state = env
            .users
            .transition(&state, std::slice::from_ref(&doc), &click, &mut rng);
        step += 1;
        out.interest.push(state.interests.entries()[0]);
        out.budget.push(state.budget);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn interest_trajectory(
    seed: u64,
    initial: f64,
    nudge_fraction: f64,
    positive_nudge_prob: f64,
) -> Result<String, JsError> {
    interest_trajectory_impl(seed, initial, nudge_fraction, positive_nudge_prob)
        .map(|t| serde_json::to_string(&t).expect("serializable"))
        .map_err(|e| JsError::new(&e))
}

#[derive(Debug, Serialize)]
pub struct StrategyCtr {
    pub strategy: String,
    pub ctr: f64,
}

/// Trains and evaluates four strategies on a short latent-bandit run.
pub fn latent_bandit_ctr_impl(
    affinity_scale: f64,
    null_score: f64,
    seed: u64,
    iterations: u64,
) -> Result<Vec<StrategyCtr>, String> {
    let strategies = [
        (r#"{"type":"random"}"#, "[]"),
        (r#"{"type":"greedy"}"#, "[]"),
        (
            r#"{"type":"tabular_q","discount":0,"features":[
                {"name":"history/0/slate_topic/0","low":0,"high":10,"bins":10},
                {"name":"history/0/choice","low":-1,"high":1,"bins":2}]}"#,
            r#"[{"type":"fixed_length_history","window":1}]"#,
        ),
        (r#"{"type":"ucb1"}"#, r#"[{"type":"cluster_click_stats"}]"#),
    ];
    strategies
        .iter()
        .map(|(agent, layers)| {
            let text = format!(
                r#"{{"env":{{"kind":"latent_bandit","affinity_scale":{affinity_scale},
                    "choice":{{"kind":"conditional","null_score":{null_score}}}}},
                  "agent":{agent},"layers":{layers},
                  "sim":{{"seed":{seed},"num_train_iterations":{iterations},"turns_per_iteration":2000,
                    "num_eval_episodes":10,"parallel_eval_workers":1}}}}"#
            );
            let cfg = ExperimentConfig::from_json(&text).map_err(|e| e.to_string())?;
            let mut sim = cfg.simulation();
            sim.train(None).map_err(|e| e.to_string())?;
            let env = cfg.build_eval_env(None);
            let row = sim.evaluate(&env, None).map_err(|e| e.to_string())?;
            Ok(StrategyCtr {
                strategy: cfg.strategy_label(),
                ctr: row.ctr,
            })
        })
        .collect()
}

#[wasm_bindgen]
pub fn latent_bandit_ctr(
    affinity_scale: f64,
    null_score: f64,
    seed: u64,
    iterations: u64,
) -> Result<String, JsError> {
    latent_bandit_ctr_impl(affinity_scale, null_score, seed, iterations)
        .map(|r| serde_json::to_string(&r).expect("serializable"))
        .map_err(|e| JsError::new(&e))
}
