//! Recommender agents.
//!
//! Agents see only [`Observation`]s. The one exception is the omniscient
//! greedy baseline, which declares [`Agent::needs_document_oracle`] and is
//! handed the candidate corpus (never the user state) at episode start.

use std::collections::BTreeMap;
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{AgentError, CheckpointError};
use crate::rng::SimRng;
use crate::types::{Corpus, Observation, Slate};

mod greedy;
mod random;
mod tabular;
mod ucb1;

pub use greedy::{GreedyAgent, GreedyObjective};
pub use random::RandomAgent;
pub use tabular::{
    count_slates, for_each_slate, Discretizer, FeatureBins, LearningRate, QConfig, QEntry, QTable,
    SlateMode, TabularQAgent,
};
pub use ucb1::{ucb_index, BanditStats, Ucb1Agent};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    pub slate: Slate,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub diagnostics: BTreeMap<String, f64>,
}

impl AgentStep {
    pub fn new(slate: Slate) -> Self {
        Self {
            slate,
            diagnostics: BTreeMap::new(),
        }
    }
}

pub trait Agent: Send + Sync + Debug {
    /// Stable identifier of the agent (or layer stack) kind.
    fn kind(&self) -> String;

    fn begin_episode(&mut self) {}

    fn step(&mut self, obs: &Observation, rng: &mut SimRng) -> Result<AgentStep, AgentError>;

    /// Feedback for the last slate: the next observation, the reward it
    /// earned, and whether the episode ended.
    fn update(&mut self, next_obs: &Observation, reward: f64, done: bool) -> Result<(), AgentError>;

    /// Training enables exploration and learning; evaluation freezes both.
    fn set_training(&mut self, training: bool);

    fn needs_document_oracle(&self) -> bool {
        false
    }

    fn provide_document_oracle(&mut self, _corpus: &Corpus) {}

    /// Learned parameters, for checkpoints and digests.
    fn save_state(&self) -> serde_json::Value;

    fn load_state(&mut self, state: &serde_json::Value) -> Result<(), CheckpointError>;

    fn box_clone(&self) -> Box<dyn Agent>;
}

impl Clone for Box<dyn Agent> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

pub(crate) fn decode_state<T: serde::de::DeserializeOwned>(
    value: &serde_json::Value,
) -> Result<T, CheckpointError> {
    serde_json::from_value(value.clone()).map_err(|e| CheckpointError::Corrupt(e.to_string()))
}

/// Candidate ids ranked by descending `key`, ties by ascending id.
pub(crate) fn top_k_by(
    obs: &Observation,
    k: usize,
    mut key: impl FnMut(&crate::types::DocObservation) -> f64,
) -> Result<Slate, AgentError> {
    let mut scored: Vec<(f64, u32)> = obs.doc_observables.iter().map(|d| (key(d), d.id)).collect();
    if scored.len() < k {
        return Err(AgentError::CorpusTooSmall {
            needed: k,
            available: scored.len(),
        });
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(Slate::new(scored.into_iter().take(k).map(|(_, id)| id).collect()))
}
