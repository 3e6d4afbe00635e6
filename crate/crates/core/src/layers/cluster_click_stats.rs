use serde::{Deserialize, Serialize};

use crate::agents::{decode_state, Agent, AgentStep, BanditStats};
use crate::error::{AgentError, CheckpointError};
use crate::rng::SimRng;
use crate::types::Observation;

/// Tracks per-topic impressions and clicks and exposes them to the base agent
/// as `augmentations.cluster_stats`.
#[derive(Clone, Debug)]
pub struct ClusterClickStats {
    base: Box<dyn Agent>,
    stats: BanditStats,
    persist: bool,
    /// Topics of the last emitted slate, by position.
    shown: Option<Vec<Option<usize>>>,
}

#[derive(Serialize, Deserialize)]
struct Saved {
    stats: BanditStats,
    base: serde_json::Value,
}

impl ClusterClickStats {
    /// Counts reset at every episode start unless `persist` is set.
    pub fn new(base: Box<dyn Agent>, num_topics: usize, persist: bool) -> Self {
        Self {
            base,
            stats: BanditStats::new(num_topics),
            persist,
            shown: None,
        }
    }

    pub fn stats(&self) -> &BanditStats {
        &self.stats
    }

    fn augment(&self, obs: &Observation) -> Observation {
        let mut out = obs.clone();
        out.augmentations.cluster_stats = Some(self.stats.clone());
        out
    }
}

impl Agent for ClusterClickStats {
    fn kind(&self) -> String {
        format!("cluster_click_stats({})", self.base.kind())
    }

    fn begin_episode(&mut self) {
        if !self.persist {
            self.stats = BanditStats::new(self.stats.num_topics());
        }
        self.shown = None;
        self.base.begin_episode();
    }

    fn step(&mut self, obs: &Observation, rng: &mut SimRng) -> Result<AgentStep, AgentError> {
        let step = self.base.step(&self.augment(obs), rng)?;
        self.shown = Some(
            step.slate
                .items
                .iter()
                .map(|&id| obs.doc(id).and_then(|d| d.topic()))
                .collect(),
        );
        Ok(step)
    }

    fn update(&mut self, next_obs: &Observation, reward: f64, done: bool) -> Result<(), AgentError> {
        if let Some(topics) = self.shown.take() {
            let chosen = next_obs.last_response.as_ref().and_then(|r| r.chosen_index);
            for (pos, topic) in topics.into_iter().enumerate() {
                if let Some(t) = topic {
                    self.stats.record(t, chosen == Some(pos));
                }
            }
        }
        let augmented = self.augment(next_obs);
        self.base.update(&augmented, reward, done)
    }

    fn set_training(&mut self, training: bool) {
        self.base.set_training(training);
    }

    fn needs_document_oracle(&self) -> bool {
        self.base.needs_document_oracle()
    }

    fn provide_document_oracle(&mut self, corpus: &crate::types::Corpus) {
        self.base.provide_document_oracle(corpus);
    }

    fn save_state(&self) -> serde_json::Value {
        serde_json::to_value(Saved {
            stats: self.stats.clone(),
            base: self.base.save_state(),
        })
        .expect("serializable stats")
    }

    fn load_state(&mut self, state: &serde_json::Value) -> Result<(), CheckpointError> {
        let saved: Saved = decode_state(state)?;
        self.stats = saved.stats;
        self.base.load_state(&saved.base)
    }

    fn box_clone(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }
}
