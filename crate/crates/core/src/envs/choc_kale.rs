//! Chocolate/kale environment.
//!
//! Documents carry a published kaleness `q ∈ [0,1]`. Chocolate (`q = 0`)
//! yields high immediate engagement; kale (`q = 1`) yields less but slowly
//! raises the user's latent satisfaction, which in turn drives how often the
//! user engages at all.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::{check, validate_observability, DocumentModel, Environment, ResponseModel, RewardKind, UserModel};
use crate::choice::{choice_distribution, sample_choice, ChoiceConfig, ScoreFn};
use crate::digest::json_digest;
use crate::error::{ChoiceError, ConfigError};
use crate::rng::{self, SimRng};
use crate::types::{Corpus, Document, Observability, Provenance, Response, TopicVector, UserState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChocKaleConfig {
    /// Kaleness buckets used as topics.
    pub num_topics: usize,
    pub choc_mean: f64,
    pub choc_stddev: f64,
    pub kale_mean: f64,
    pub kale_stddev: f64,
    /// Satisfaction drift per consumption, scaled by `2q - 1`.
    pub drift_step: f64,
    pub drift_noise: f64,
    pub initial_satisfaction: f64,
    pub slate_size: usize,
    pub candidate_count: usize,
    pub episode_length: usize,
    pub resample_corpus: bool,
    /// Scores are the user's satisfaction, identical for every document.
    pub choice: ChoiceConfig,
    pub observability: Observability,
}

impl Default for ChocKaleConfig {
    fn default() -> Self {
        Self {
            num_topics: 2,
            choc_mean: 1.0,
            choc_stddev: 1.0,
            kale_mean: 0.3,
            kale_stddev: 0.3,
            drift_step: 0.01,
            drift_noise: 0.01,
            initial_satisfaction: 0.5,
            slate_size: 1,
            candidate_count: 10,
            episode_length: 100,
            resample_corpus: true,
            choice: ChoiceConfig::conditional(ScoreFn::Identity).with_null(Some(0.5)),
            observability: Observability::default().with_doc_fields(&["quality"]),
        }
    }
}

impl ChocKaleConfig {
    pub fn validate(&self, path: &str) -> Result<(), ConfigError> {
        check(self.num_topics >= 1, format!("{path}.num_topics"), "must be >= 1")?;
        check(self.choc_stddev > 0.0, format!("{path}.choc_stddev"), "must be > 0")?;
        check(self.kale_stddev > 0.0, format!("{path}.kale_stddev"), "must be > 0")?;
        check(
            self.drift_step > 0.0 && self.drift_step < 1.0,
            format!("{path}.drift_step"),
            "must lie in (0, 1)",
        )?;
        check(self.drift_noise >= 0.0, format!("{path}.drift_noise"), "must be >= 0")?;
        check(
            (0.0..=1.0).contains(&self.initial_satisfaction),
            format!("{path}.initial_satisfaction"),
            "must lie in [0, 1]",
        )?;
        check(self.slate_size >= 1, format!("{path}.slate_size"), "must be >= 1")?;
        check(
            self.candidate_count >= self.slate_size,
            format!("{path}.candidate_count"),
            "must be >= slate_size",
        )?;
        check(self.episode_length >= 1, format!("{path}.episode_length"), "must be >= 1")?;
        self.choice.validate(&format!("{path}.choice"))?;
        validate_observability(&self.observability, &format!("{path}.observability"))
    }

    pub fn build(&self, corpus_seed: u64) -> Environment {
        let model = Arc::new(ChocKaleModel::new(self.clone()));
        Environment::new(
            model.clone(),
            model.clone(),
            model,
            RewardKind::Engagement,
            self.observability.clone(),
            self.slate_size,
            self.resample_corpus,
            corpus_seed,
        )
    }

    /// Lognormal `(μ, σ)` interpolated linearly in kaleness.
    pub fn engagement_params(&self, kaleness: f64) -> (f64, f64) {
        let q = kaleness;
        (
            (1.0 - q) * self.choc_mean + q * self.kale_mean,
            (1.0 - q) * self.choc_stddev + q * self.kale_stddev,
        )
    }

    /// Mean of the engagement distribution at kaleness `q`.
    pub fn expected_engagement(&self, kaleness: f64) -> f64 {
        let (mu, sigma) = self.engagement_params(kaleness);
        (mu + sigma * sigma / 2.0).exp()
    }
}

pub fn engagement(cfg: &ChocKaleConfig, doc: &Document, rng: &mut SimRng) -> f64 {
    let q = doc.observable_quality.unwrap_or(doc.quality);
    let (mu, sigma) = cfg.engagement_params(q);
    LogNormal::new(mu, sigma).expect("positive sigma").sample(rng)
}

/// `clip(s + η·(2q - 1) + noise, 0, 1)`.
pub fn drift_satisfaction(satisfaction: f64, kaleness: f64, step: f64, noise: f64) -> f64 {
    (satisfaction + step * (2.0 * kaleness - 1.0) + noise).clamp(0.0, 1.0)
}

#[derive(Debug)]
pub struct ChocKaleModel {
    cfg: ChocKaleConfig,
    digest: String,
}

impl ChocKaleModel {
    pub fn new(cfg: ChocKaleConfig) -> Self {
        Self {
            digest: json_digest(&cfg),
            cfg,
        }
    }
}

impl UserModel for ChocKaleModel {
    fn sample_user(&self, _rng: &mut SimRng) -> UserState {
        UserState {
            interests: TopicVector::zeros(self.cfg.num_topics),
            budget: self.cfg.episode_length as f64,
            satisfaction: self.cfg.initial_satisfaction,
            observable_features: Default::default(),
        }
    }

    fn transition(
        &self,
        state: &UserState,
        slate: &[Document],
        response: &Response,
        rng: &mut SimRng,
    ) -> UserState {
        let mut next = state.clone();
        next.budget = (state.budget - 1.0).max(0.0);
        if let Some(doc) = response.chosen_index.and_then(|i| slate.get(i)) {
            let noise = if self.cfg.drift_noise > 0.0 {
                Normal::new(0.0, self.cfg.drift_noise)
                    .expect("validated noise")
                    .sample(rng)
            } else {
                0.0
            };
            next.satisfaction =
                drift_satisfaction(state.satisfaction, doc.quality, self.cfg.drift_step, noise);
        }
        next
    }

    fn is_terminal(&self, state: &UserState, step: usize) -> bool {
        super::is_terminal(state, step, self.cfg.episode_length)
    }
}

impl DocumentModel for ChocKaleModel {
    fn sample_corpus(&self, rng: &mut SimRng) -> Corpus {
        let seed: u64 = rng.random();
        let mut rng = rng::seeded(seed);
        let n = self.cfg.num_topics;
        let documents = (0..self.cfg.candidate_count as u32)
            .map(|id| {
                let q: f64 = rng.random();
                let bucket = ((q * n as f64) as usize).min(n - 1);
                Document {
                    id,
                    topics: TopicVector::one_hot(n, bucket),
                    length: 1.0,
                    quality: q,
                    observable_quality: Some(q),
                }
            })
            .collect();
        Corpus::new(
            documents,
            Provenance {
                seed,
                config_digest: self.digest.clone(),
            },
        )
        .expect("dense ids")
    }
}

impl ResponseModel for ChocKaleModel {
    fn scores(&self, state: &UserState, slate: &[Document]) -> Result<Vec<f64>, ChoiceError> {
        Ok(vec![state.satisfaction; slate.len()])
    }

    fn choice_config(&self) -> &ChoiceConfig {
        &self.cfg.choice
    }

    fn respond(
        &self,
        state: &UserState,
        slate: &[Document],
        rng: &mut SimRng,
    ) -> Result<Response, ChoiceError> {
        let scores = self.scores(state, slate)?;
        let dist = choice_distribution(&scores, &self.cfg.choice)?;
        Ok(match sample_choice(&dist, rng) {
            Some(i) => Response {
                chosen_index: Some(i),
                engagement: engagement(&self.cfg, &slate[i], rng),
                revealed_quality: Some(slate[i].quality),
            },
            None => Response::no_click(),
        })
    }
}
