use serde::{Deserialize, Serialize};

use super::{Agent, AgentStep};
use crate::error::{AgentError, CheckpointError};
use crate::rng::SimRng;
use crate::types::{DocObservation, Observation, Slate};

/// Per-topic impression and click counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BanditStats {
    pub impressions: Vec<u64>,
    pub clicks: Vec<u64>,
}

impl BanditStats {
    pub fn new(num_topics: usize) -> Self {
        Self {
            impressions: vec![0; num_topics],
            clicks: vec![0; num_topics],
        }
    }

    pub fn num_topics(&self) -> usize {
        self.impressions.len()
    }

    /// Total impressions across topics.
    pub fn total(&self) -> u64 {
        self.impressions.iter().sum()
    }

    /// Empirical click-through rate; 0 for an unpulled topic.
    pub fn ctr(&self, topic: usize) -> Option<f64> {
        let n = *self.impressions.get(topic)?;
        let x = self.clicks[topic];
        Some(if n == 0 { 0.0 } else { x as f64 / n as f64 })
    }

    /// Grows the topic range on demand.
    pub fn record(&mut self, topic: usize, clicked: bool) {
        if topic >= self.num_topics() {
            self.impressions.resize(topic + 1, 0);
            self.clicks.resize(topic + 1, 0);
        }
        self.impressions[topic] += 1;
        if clicked {
            self.clicks[topic] += 1;
        }
    }
}

/// `x/n_t + sqrt(2 ln n / n_t)`, infinite for an unpulled arm.
pub fn ucb_index(clicks: u64, impressions: u64, total: u64) -> f64 {
    if impressions == 0 {
        return f64::INFINITY;
    }
    let n_t = impressions as f64;
    let bonus = (2.0 * (total.max(1) as f64).ln() / n_t).sqrt();
    clicks as f64 / n_t + bonus
}

/// Topic-level UCB1 over the click statistics supplied by a click-stats layer.
#[derive(Clone, Debug)]
pub struct Ucb1Agent {
    slate_size: usize,
}

impl Ucb1Agent {
    pub fn new(slate_size: usize) -> Self {
        Self { slate_size }
    }

    /// Topic with the highest index among those present in `topics` (sorted).
    /// Unpulled topics win in id order; ties go to the lower id.
    pub fn select_topic(stats: &BanditStats, topics: &[usize]) -> Option<usize> {
        let total = stats.total();
        let mut best: Option<(usize, f64)> = None;
        for &t in topics {
            let n = stats.impressions.get(t).copied().unwrap_or(0);
            let x = stats.clicks.get(t).copied().unwrap_or(0);
            let idx = ucb_index(x, n, total);
            if best.is_none_or(|(_, b)| idx > b) {
                best = Some((t, idx));
            }
        }
        best.map(|(t, _)| t)
    }
}

impl Agent for Ucb1Agent {
    fn kind(&self) -> String {
        "ucb1".into()
    }

    fn step(&mut self, obs: &Observation, _rng: &mut SimRng) -> Result<AgentStep, AgentError> {
        let stats = obs
            .augmentations
            .cluster_stats
            .as_ref()
            .ok_or(AgentError::MissingClickStats)?;
        if obs.doc_observables.len() < self.slate_size {
            return Err(AgentError::CorpusTooSmall {
                needed: self.slate_size,
                available: obs.doc_observables.len(),
            });
        }
        let mut docs: Vec<&DocObservation> = obs.doc_observables.iter().collect();
        docs.sort_by_key(|d| d.id);
        let mut topics: Vec<usize> = docs.iter().filter_map(|d| d.topic()).collect();
        topics.sort_unstable();
        topics.dedup();

        let chosen = Self::select_topic(stats, &topics);
        let mut in_topic: Vec<&DocObservation> =
            docs.iter().copied().filter(|d| chosen.is_some() && d.topic() == chosen).collect();
        in_topic.sort_by(|a, b| {
            let qa = a.quality.unwrap_or(0.0);
            let qb = b.quality.unwrap_or(0.0);
            qb.total_cmp(&qa).then(a.id.cmp(&b.id))
        });
        let mut items: Vec<u32> = in_topic.iter().take(self.slate_size).map(|d| d.id).collect();
        for d in &docs {
            if items.len() == self.slate_size {
                break;
            }
            if !items.contains(&d.id) {
                items.push(d.id);
            }
        }

        let mut step = AgentStep::new(Slate::new(items));
        if let Some(t) = chosen {
            step.diagnostics.insert("topic".into(), t as f64);
        }
        let total = stats.total();
        for &t in &topics {
            let n = stats.impressions.get(t).copied().unwrap_or(0);
            if n > 0 {
                let idx = ucb_index(stats.clicks[t], n, total);
                step.diagnostics.insert(format!("ucb/{t}"), idx);
            }
        }
        Ok(step)
    }

    /// Counts live in the click-stats layer, so there is nothing to learn here.
    fn update(&mut self, _: &Observation, _: f64, _: bool) -> Result<(), AgentError> {
        Ok(())
    }

    fn set_training(&mut self, _: bool) {}

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
