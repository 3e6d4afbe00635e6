use rand::seq::SliceRandom;

use super::{Agent, AgentStep};
use crate::error::{AgentError, CheckpointError};
use crate::rng::SimRng;
use crate::types::{Observation, Slate};

/// Uniformly random duplicate-free slates.
#[derive(Clone, Debug)]
pub struct RandomAgent {
    slate_size: usize,
}

impl RandomAgent {
    pub fn new(slate_size: usize) -> Self {
        Self { slate_size }
    }
}

impl Agent for RandomAgent {
    fn kind(&self) -> String {
        "random".into()
    }

    fn step(&mut self, obs: &Observation, rng: &mut SimRng) -> Result<AgentStep, AgentError> {
        let mut ids = obs.candidate_ids();
        if ids.len() < self.slate_size {
            return Err(AgentError::CorpusTooSmall {
                needed: self.slate_size,
                available: ids.len(),
            });
        }
        let (picked, _) = ids.partial_shuffle(rng, self.slate_size);
        Ok(AgentStep::new(Slate::new(picked.to_vec())))
    }

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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::types::{DocObservation, UserObservation};

    fn obs(n: u32) -> Observation {
        Observation {
            user_observable: UserObservation::default(),
            doc_observables: (0..n)
                .map(|id| DocObservation {
                    id,
                    topics: None,
                    length: None,
                    quality: None,
                })
                .collect(),
            last_response: None,
            augmentations: Default::default(),
        }
    }

    #[test]
    fn forced_single_choice() {
        let mut a = RandomAgent::new(1);
        let s = a.step(&obs(1), &mut rng::seeded(0)).unwrap();
        assert_eq!(s.slate.items, vec![0]);
    }

    #[test]
    fn too_small_corpus() {
        let mut a = RandomAgent::new(3);
        assert_eq!(
            a.step(&obs(2), &mut rng::seeded(0)).unwrap_err(),
            AgentError::CorpusTooSmall {
                needed: 3,
                available: 2
            }
        );
    }

    #[test]
    fn inclusion_frequency_is_k_over_m() {
        // each doc is in a 3-of-10 slate with probability 0.3; 3σ at 1e5 runs ≈ 0.0043
        let mut a = RandomAgent::new(3);
        let o = obs(10);
        let mut rng = rng::seeded(21);
        let mut counts = [0usize; 10];
        let runs = 100_000;
        for _ in 0..runs {
            let s = a.step(&o, &mut rng).unwrap().slate;
            let mut sorted = s.items.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), 3);
            for id in s.items {
                counts[id as usize] += 1;
            }
        }
        for c in counts {
            assert!((c as f64 / runs as f64 - 0.3).abs() < 0.01);
        }
    }
}
