use std::sync::Arc;

use super::{top_k_by, Agent, AgentStep};
use crate::choice::{ChoiceKind, ScoreFn};
use crate::envs::{ChocKaleConfig, ResponseModel};
use crate::error::{AgentError, CheckpointError};
use crate::rng::SimRng;
use crate::types::{Corpus, Observation, UserState};

/// What the myopic agent maximizes.
#[derive(Clone, Debug)]
pub enum GreedyObjective {
    /// `f(score(û, d))` under the environment's own response model, with `û`
    /// the prior-mean user. Needs the document oracle for latent quality.
    ExpectedChoice {
        model: Arc<dyn ResponseModel>,
        mean_user: UserState,
        transform: ScoreFn,
    },
    /// Expected immediate engagement from published kaleness.
    ExpectedEngagement(ChocKaleConfig),
    /// Highest published quality (a kale-only policy).
    Kaleness,
}

/// Myopic top-k agent; ties go to the lower document id.
#[derive(Clone, Debug)]
pub struct GreedyAgent {
    slate_size: usize,
    objective: GreedyObjective,
    oracle: Option<Corpus>,
}

impl GreedyAgent {
    pub fn new(slate_size: usize, objective: GreedyObjective) -> Self {
        Self {
            slate_size,
            objective,
            oracle: None,
        }
    }

    /// The transformation the choice model applies to scores: `f` for
    /// conditional choice, `exp` otherwise. Only its ordering matters.
    pub fn transform_for(kind: ChoiceKind, score_fn: ScoreFn) -> ScoreFn {
        match kind {
            ChoiceKind::Conditional => score_fn,
            _ => ScoreFn::Exp,
        }
    }
}

impl Agent for GreedyAgent {
    fn kind(&self) -> String {
        "greedy".into()
    }

    fn step(&mut self, obs: &Observation, _rng: &mut SimRng) -> Result<AgentStep, AgentError> {
        let slate = match &self.objective {
            GreedyObjective::ExpectedChoice {
                model,
                mean_user,
                transform,
            } => {
                let corpus = self.oracle.as_ref().ok_or(AgentError::MissingOracle)?;
                let mut values = Vec::with_capacity(obs.doc_observables.len());
                for d in &obs.doc_observables {
                    let doc = corpus
                        .get(d.id)
                        .ok_or(AgentError::MissingOracle)?
                        .clone();
                    let s = model.scores(mean_user, std::slice::from_ref(&doc))?[0];
                    values.push(transform.apply(s));
                }
                let mut i = 0;
                top_k_by(obs, self.slate_size, |_| {
                    i += 1;
                    values[i - 1]
                })?
            }
            GreedyObjective::ExpectedEngagement(cfg) => top_k_by(obs, self.slate_size, |d| {
                cfg.expected_engagement(d.quality.unwrap_or(0.0))
            })?,
            GreedyObjective::Kaleness => {
                top_k_by(obs, self.slate_size, |d| d.quality.unwrap_or(0.0))?
            }
        };
        Ok(AgentStep::new(slate))
    }

    fn update(&mut self, _: &Observation, _: f64, _: bool) -> Result<(), AgentError> {
        Ok(())
    }

    fn set_training(&mut self, _: bool) {}

    fn needs_document_oracle(&self) -> bool {
        matches!(self.objective, GreedyObjective::ExpectedChoice { .. })
    }

    fn provide_document_oracle(&mut self, corpus: &Corpus) {
        self.oracle = Some(corpus.clone());
    }

    fn save_state(&self) -> serde_json::Value {
        serde_json::Value::Null
    }

    fn load_state(&mut self, _: &serde_json::Value) -> Result<(), CheckpointError> {
        Ok(())
    }

    fn box_clone(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }
}
