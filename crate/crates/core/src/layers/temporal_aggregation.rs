use serde::{Deserialize, Serialize};

use crate::agents::{decode_state, Agent, AgentStep};
use crate::error::{AgentError, CheckpointError};
use crate::rng::SimRng;
use crate::types::{Corpus, DocObservation, Observation, Slate};

/// Topic of each slate position; documents without observable topics map to -1.
pub fn slate_features(obs: &Observation, slate: &Slate) -> Vec<i64> {
    slate
        .items
        .iter()
        .map(|&id| {
            obs.doc(id)
                .and_then(DocObservation::topic)
                .map_or(-1, |t| t as i64)
        })
        .collect()
}

fn multiset(features: &[i64]) -> Vec<i64> {
    let mut m = features.to_vec();
    m.sort_unstable();
    m
}

/// Calls the base agent once every `period` steps and in between reproduces
/// a slate with the cached topic multiset. With a positive `switching_cost`
/// the base agent is charged that amount whenever an emitted slate's
/// features differ from the previous one.
#[derive(Clone, Debug)]
pub struct TemporalAggregation {
    base: Box<dyn Agent>,
    period: usize,
    switching_cost: f64,
    t: usize,
    cached: Option<Vec<i64>>,
    previous: Option<Vec<i64>>,
    penalty: f64,
    accumulated: f64,
    base_pending: bool,
}

#[derive(Serialize, Deserialize)]
struct Saved {
    base: serde_json::Value,
}

impl TemporalAggregation {
    pub fn new(base: Box<dyn Agent>, period: usize, switching_cost: f64) -> Self {
        Self {
            base,
            period: period.max(1),
            switching_cost,
            t: 0,
            cached: None,
            previous: None,
            penalty: 0.0,
            accumulated: 0.0,
            base_pending: false,
        }
    }

    /// Slate over the current candidates whose topic multiset is closest to
    /// `target`: each position takes the lowest unused id of its topic, and
    /// unmatched positions fall back to the lowest unused id.
    fn reproduce(obs: &Observation, target: &[i64]) -> Result<Slate, AgentError> {
        let mut docs: Vec<&DocObservation> = obs.doc_observables.iter().collect();
        if docs.len() < target.len() {
            return Err(AgentError::CorpusTooSmall {
                needed: target.len(),
                available: docs.len(),
            });
        }
        docs.sort_by_key(|d| d.id);
        let mut used = vec![false; docs.len()];
        let mut items: Vec<Option<u32>> = vec![None; target.len()];
        for (pos, &topic) in target.iter().enumerate() {
            let found = docs.iter().enumerate().find(|(i, d)| {
                !used[*i] && d.topic().map_or(-1, |t| t as i64) == topic
            });
            if let Some((i, d)) = found {
                used[i] = true;
                items[pos] = Some(d.id);
            }
        }
        for slot in items.iter_mut().filter(|s| s.is_none()) {
            let i = used.iter().position(|u| !u).expect("enough candidates");
            used[i] = true;
            *slot = Some(docs[i].id);
        }
        Ok(Slate::new(items.into_iter().map(|s| s.expect("filled")).collect()))
    }
}

impl Agent for TemporalAggregation {
    fn kind(&self) -> String {
        format!("temporal_aggregation({})", self.base.kind())
    }

    fn begin_episode(&mut self) {
        self.t = 0;
        self.cached = None;
        self.previous = None;
        self.penalty = 0.0;
        self.accumulated = 0.0;
        self.base_pending = false;
        self.base.begin_episode();
    }

    fn step(&mut self, obs: &Observation, rng: &mut SimRng) -> Result<AgentStep, AgentError> {
        let boundary = self.t.is_multiple_of(self.period) || self.cached.is_none();
        let mut step = if boundary {
            let step = self.base.step(obs, rng)?;
            self.cached = Some(slate_features(obs, &step.slate));
            self.base_pending = true;
            step
        } else {
            let target = self.cached.as_ref().expect("cached at boundary");
            AgentStep::new(Self::reproduce(obs, target)?)
        };
        let features = multiset(&slate_features(obs, &step.slate));
        let switched = self.previous.as_ref().is_some_and(|p| *p != features);
        self.penalty = if switched { self.switching_cost } else { 0.0 };
        self.previous = Some(features);
        self.t += 1;
        step.diagnostics.insert("base_called".into(), f64::from(u8::from(boundary)));
        step.diagnostics.insert("switched".into(), f64::from(u8::from(switched)));
        Ok(step)
    }

    fn update(&mut self, next_obs: &Observation, reward: f64, done: bool) -> Result<(), AgentError> {
        self.accumulated += reward - self.penalty;
        self.penalty = 0.0;
        if self.base_pending && (done || self.t.is_multiple_of(self.period)) {
            let r = std::mem::take(&mut self.accumulated);
            self.base_pending = false;
            self.base.update(next_obs, r, done)?;
        }
        Ok(())
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::testing::{obs, Scripted};
    use crate::rng;

    #[test]
    fn period_one_is_transparent() {
        let slates = vec![vec![0], vec![2], vec![1]];
        let (base, calls) = Scripted::new(slates.clone());
        let mut layer = TemporalAggregation::new(Box::new(base), 1, 0.0);
        let o = obs(&[0, 1, 2], None);
        for i in 0..6 {
            let s = layer.step(&o, &mut rng::seeded(0)).unwrap();
            assert_eq!(s.slate.items, slates[i % 3]);
            layer.update(&o, i as f64, false).unwrap();
        }
        assert_eq!(calls.lock().unwrap().rewards, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn base_called_once_per_period() {
        for (n, k) in [(9usize, 3usize), (10, 3), (1000, 10), (7, 1)] {
            let (base, calls) = Scripted::new(vec![vec![0]]);
            let mut layer = TemporalAggregation::new(Box::new(base), k, 0.0);
            let o = obs(&[0, 1], None);
            for i in 0..n {
                layer.step(&o, &mut rng::seeded(0)).unwrap();
                layer.update(&o, 1.0, i + 1 == n).unwrap();
            }
            let c = calls.lock().unwrap();
            assert_eq!(c.steps, n.div_ceil(k));
            assert_eq!(c.rewards.len(), n.div_ceil(k));
            assert_eq!(c.rewards.iter().sum::<f64>(), n as f64);
        }
    }

    #[test]
    fn reproduces_cached_topics_on_new_candidates() {
        let (base, _) = Scripted::new(vec![vec![1, 0]]);
        let mut layer = TemporalAggregation::new(Box::new(base), 2, 0.0);
        let first = layer.step(&obs(&[3, 2, 2], None), &mut rng::seeded(0)).unwrap();
        assert_eq!(first.slate.items, vec![1, 0]);
        layer.update(&obs(&[3, 2, 2], None), 0.0, false).unwrap();
        // topics (2, 3) reproduced on a fresh corpus: lowest id per topic, in order
        let second = layer.step(&obs(&[0, 3, 2, 2, 3], None), &mut rng::seeded(0)).unwrap();
        assert_eq!(second.slate.items, vec![2, 1]);
        // a missing topic falls back to the lowest unused id
        layer.update(&obs(&[0, 1], None), 0.0, false).unwrap();
        let _ = layer.step(&obs(&[3, 2, 2], None), &mut rng::seeded(0)).unwrap();
        layer.update(&obs(&[3, 2, 2], None), 0.0, false).unwrap();
        let fallback = layer.step(&obs(&[0, 0, 3], None), &mut rng::seeded(0)).unwrap();
        assert_eq!(fallback.slate.items, vec![0, 2]);
    }

    #[test]
    fn switching_cost_is_charged_to_base() {
        // base alternates between topic 0 and topic 1 every step
        let (base, calls) = Scripted::new(vec![vec![0], vec![1]]);
        let mut layer = TemporalAggregation::new(Box::new(base), 1, 0.5);
        let o = obs(&[0, 1], None);
        layer.step(&o, &mut rng::seeded(0)).unwrap();
        layer.update(&o, 1.0, false).unwrap();
        layer.step(&o, &mut rng::seeded(0)).unwrap();
        layer.update(&o, 1.0, true).unwrap();
        assert_eq!(calls.lock().unwrap().rewards, vec![1.0, 0.5]);
    }
}
