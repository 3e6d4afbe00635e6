use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::{decode_state, Agent, AgentStep};
use crate::error::{AgentError, CheckpointError};
use crate::rng::SimRng;
use crate::types::{Corpus, History, HistoryEntry, Observation, Response, Slate};

/// Exposes the last `window` turns as `augmentations.history`, most recent last.
#[derive(Clone, Debug)]
pub struct FixedLengthHistory {
    base: Box<dyn Agent>,
    history: History,
    pending: Option<(Observation, Slate)>,
}

#[derive(Serialize, Deserialize)]
struct Saved {
    base: serde_json::Value,
}

impl FixedLengthHistory {
    pub fn new(base: Box<dyn Agent>, window: usize) -> Self {
        Self {
            base,
            history: History::new(window),
            pending: None,
        }
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    fn augment(&self, obs: &Observation) -> Observation {
        let mut out = obs.clone();
        out.augmentations.history = Some(self.history.to_vec());
        out
    }
}

impl Agent for FixedLengthHistory {
    fn kind(&self) -> String {
        format!("fixed_length_history({})", self.base.kind())
    }

    fn begin_episode(&mut self) {
        self.history.clear();
        self.pending = None;
        self.base.begin_episode();
    }

    fn step(&mut self, obs: &Observation, rng: &mut SimRng) -> Result<AgentStep, AgentError> {
        let step = self.base.step(&self.augment(obs), rng)?;
        self.pending = Some((obs.without_augmentations(), step.slate.clone()));
        Ok(step)
    }

    fn update(&mut self, next_obs: &Observation, reward: f64, done: bool) -> Result<(), AgentError> {
        if let Some((observation, slate)) = self.pending.take() {
            let response = next_obs
                .last_response
                .clone()
                .unwrap_or_else(Response::no_click);
            self.history.push(HistoryEntry {
                observation: Arc::new(observation),
                slate,
                response,
            });
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

    fn provide_document_oracle(&mut self, corpus: &Corpus) {
        self.base.provide_document_oracle(corpus);
    }

    /// The history is per-episode scratch state and is not checkpointed.
    fn save_state(&self) -> serde_json::Value {
        serde_json::to_value(Saved {
            base: self.base.save_state(),
        })
        .expect("serializable state")
    }

    fn load_state(&mut self, state: &serde_json::Value) -> Result<(), CheckpointError> {
        let saved: Saved = decode_state(state)?;
        self.base.load_state(&saved.base)
    }

    fn box_clone(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }
}
