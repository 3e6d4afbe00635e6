use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{decode_state, Agent, AgentStep};
use crate::error::{AgentError, CheckpointError};
use crate::rng::SimRng;
use crate::types::{Corpus, Observation};

/// Treats a list of child agents as abstract actions.
///
/// Children are picked uniformly at random for the first `warmup` steps and
/// epsilon-greedily on their running mean reward afterwards. Reward goes to
/// the selected child only.
#[derive(Clone, Debug)]
pub struct HierarchicalNode {
    children: Vec<Box<dyn Agent>>,
    epsilon: f64,
    warmup: u64,
    totals: Vec<f64>,
    counts: Vec<u64>,
    steps: u64,
    active: Option<usize>,
    training: bool,
}

#[derive(Serialize, Deserialize)]
struct Saved {
    totals: Vec<f64>,
    counts: Vec<u64>,
    steps: u64,
    children: Vec<serde_json::Value>,
}

impl HierarchicalNode {
    pub fn new(children: Vec<Box<dyn Agent>>, epsilon: f64, warmup: u64) -> Self {
        let n = children.len();
        Self {
            children,
            epsilon,
            warmup,
            totals: vec![0.0; n],
            counts: vec![0; n],
            steps: 0,
            active: None,
            training: true,
        }
    }

    /// Running mean reward per child; unvisited children rank first.
    pub fn means(&self) -> Vec<f64> {
        self.totals
            .iter()
            .zip(&self.counts)
            .map(|(&s, &n)| if n == 0 { f64::INFINITY } else { s / n as f64 })
            .collect()
    }

    fn select(&self, rng: &mut SimRng) -> usize {
        let n = self.children.len();
        if n == 1 {
            return 0;
        }
        let explore = self.training
            && (self.steps < self.warmup || (self.epsilon > 0.0 && rng.random::<f64>() < self.epsilon));
        if explore {
            return rng.random_range(0..n);
        }
        let means = self.means();
        let mut best = 0;
        for (i, &m) in means.iter().enumerate() {
            if m > means[best] {
                best = i;
            }
        }
        best
    }
}

impl Agent for HierarchicalNode {
    fn kind(&self) -> String {
        let kids: Vec<String> = self.children.iter().map(|c| c.kind()).collect();
        format!("hierarchical({})", kids.join(","))
    }

    fn begin_episode(&mut self) {
        self.active = None;
        for c in &mut self.children {
            c.begin_episode();
        }
    }

    fn step(&mut self, obs: &Observation, rng: &mut SimRng) -> Result<AgentStep, AgentError> {
        if self.children.is_empty() {
            return Err(AgentError::NoChildren);
        }
        let i = self.select(rng);
        self.active = Some(i);
        self.steps += 1;
        let mut step = self.children[i].step(obs, rng)?;
        step.diagnostics.insert("child".into(), i as f64);
        Ok(step)
    }

    fn update(&mut self, next_obs: &Observation, reward: f64, done: bool) -> Result<(), AgentError> {
        let Some(i) = self.active.take() else {
            return Ok(());
        };
        if self.training {
            self.totals[i] += reward;
            self.counts[i] += 1;
        }
        self.children[i].update(next_obs, reward, done)
    }

    fn set_training(&mut self, training: bool) {
        self.training = training;
        for c in &mut self.children {
            c.set_training(training);
        }
    }

    fn needs_document_oracle(&self) -> bool {
        self.children.iter().any(|c| c.needs_document_oracle())
    }

    fn provide_document_oracle(&mut self, corpus: &Corpus) {
        for c in &mut self.children {
            c.provide_document_oracle(corpus);
        }
    }

    fn save_state(&self) -> serde_json::Value {
        serde_json::to_value(Saved {
            totals: self.totals.clone(),
            counts: self.counts.clone(),
            steps: self.steps,
            children: self.children.iter().map(|c| c.save_state()).collect(),
        })
        .expect("serializable state")
    }

    fn load_state(&mut self, state: &serde_json::Value) -> Result<(), CheckpointError> {
        let saved: Saved = decode_state(state)?;
        if saved.children.len() != self.children.len() {
            return Err(CheckpointError::Corrupt(format!(
                "checkpoint has {} children, node has {}",
                saved.children.len(),
                self.children.len()
            )));
        }
        for (c, s) in self.children.iter_mut().zip(&saved.children) {
            c.load_state(s)?;
        }
        self.totals = saved.totals;
        self.counts = saved.counts;
        self.steps = saved.steps;
        Ok(())
    }

    fn box_clone(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }
}
