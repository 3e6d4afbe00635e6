//! Latent-state bandit environment.
//!
//! Single-topic documents with lognormal quality; users with static, hidden
//! topic interests. A document is chosen with probability proportional to
//! `f(s·I(u,d) + L_d)` where `s` is the topic-affinity scale.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::{
    check, sample_topic, validate_observability, validate_topic_weights, DocumentModel,
    Environment, ResponseModel, RewardKind, UserModel, UserPrior,
};
use crate::choice::{self, choice_distribution, sample_choice, ChoiceConfig, ScoreFn};
use crate::digest::json_digest;
use crate::error::{ChoiceError, ConfigError};
use crate::rng::{self, SimRng};
use crate::types::{Corpus, Document, Observability, Provenance, Response, TopicVector, UserState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatentBanditConfig {
    pub num_topics: usize,
    /// Multiplies the topic affinity before scoring.
    pub affinity_scale: f64,
    /// Per-topic log-mean of quality; defaults keep `E[L_d]` near 1.
    pub quality_means: Option<Vec<f64>>,
    pub quality_sigma: f64,
    pub user_prior: UserPrior,
    pub doc_topic_weights: Option<Vec<f64>>,
    pub slate_size: usize,
    pub candidate_count: usize,
    pub episode_length: usize,
    pub resample_corpus: bool,
    pub choice: ChoiceConfig,
    pub observability: Observability,
}

impl Default for LatentBanditConfig {
    fn default() -> Self {
        Self {
            num_topics: 10,
            affinity_scale: 5.0,
            quality_means: None,
            quality_sigma: 0.5,
            user_prior: UserPrior::default(),
            doc_topic_weights: None,
            slate_size: 1,
            candidate_count: 20,
            episode_length: 500,
            resample_corpus: true,
            choice: ChoiceConfig::conditional(ScoreFn::Exp).with_null(Some(6.0)),
            observability: Observability::default(),
        }
    }
}

impl LatentBanditConfig {
    pub fn high_affinity() -> Self {
        Self::default()
    }

    pub fn low_affinity() -> Self {
        Self {
            affinity_scale: 0.5,
            choice: ChoiceConfig::conditional(ScoreFn::Exp).with_null(Some(3.5)),
            ..Self::default()
        }
    }

    /// `μ_t = -σ²/2 + 0.2·(2t/(T-1) - 1)`: a mild per-topic spread around
    /// a unit-mean lognormal.
    pub fn quality_means(&self) -> Vec<f64> {
        match &self.quality_means {
            Some(m) => m.clone(),
            None => {
                let base = -self.quality_sigma * self.quality_sigma / 2.0;
                let n = self.num_topics;
                (0..n)
                    .map(|t| {
                        let spread = if n > 1 {
                            2.0 * t as f64 / (n - 1) as f64 - 1.0
                        } else {
                            0.0
                        };
                        base + 0.2 * spread
                    })
                    .collect()
            }
        }
    }

    pub fn validate(&self, path: &str) -> Result<(), ConfigError> {
        check(self.num_topics >= 1, format!("{path}.num_topics"), "must be >= 1")?;
        check(self.affinity_scale > 0.0, format!("{path}.affinity_scale"), "must be > 0")?;
        check(self.quality_sigma > 0.0, format!("{path}.quality_sigma"), "must be > 0")?;
        if let Some(m) = &self.quality_means {
            check(
                m.len() == self.num_topics,
                format!("{path}.quality_means"),
                format!("expected {} entries", self.num_topics),
            )?;
        }
        self.user_prior
            .validate(self.num_topics, &format!("{path}.user_prior"))?;
        validate_topic_weights(
            self.doc_topic_weights.as_deref(),
            self.num_topics,
            &format!("{path}.doc_topic_weights"),
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
        let model = Arc::new(LatentBanditModel::new(self.clone()));
        Environment::new(
            model.clone(),
            model.clone(),
            model,
            RewardKind::Clicks,
            self.observability.clone(),
            self.slate_size,
            self.resample_corpus,
            corpus_seed,
        )
    }

    pub fn mean_user(&self) -> TopicVector {
        self.user_prior.mean(self.num_topics)
    }
}

/// `s·I(u,d) + L_d`, the score before the choice transformation.
pub fn base_score(user: &UserState, doc: &Document, affinity_scale: f64) -> Result<f64, ChoiceError> {
    Ok(affinity_scale * choice::score(user, doc)? + doc.quality)
}

#[derive(Debug)]
pub struct LatentBanditModel {
    cfg: LatentBanditConfig,
    quality_means: Vec<f64>,
    digest: String,
}

impl LatentBanditModel {
    pub fn new(cfg: LatentBanditConfig) -> Self {
        Self {
            quality_means: cfg.quality_means(),
            digest: json_digest(&cfg),
            cfg,
        }
    }
}

impl UserModel for LatentBanditModel {
    fn sample_user(&self, rng: &mut SimRng) -> UserState {
        UserState {
            interests: self.cfg.user_prior.sample(self.cfg.num_topics, rng),
            budget: self.cfg.episode_length as f64,
            satisfaction: 0.5,
            observable_features: Default::default(),
        }
    }

    fn transition(
        &self,
        state: &UserState,
        _slate: &[Document],
        _response: &Response,
        _rng: &mut SimRng,
    ) -> UserState {
        // interests are static; one unit of session time per turn
        let mut next = state.clone();
        next.budget = (state.budget - 1.0).max(0.0);
        next
    }

    fn is_terminal(&self, state: &UserState, step: usize) -> bool {
        super::is_terminal(state, step, self.cfg.episode_length)
    }
}

impl DocumentModel for LatentBanditModel {
    fn sample_corpus(&self, rng: &mut SimRng) -> Corpus {
        let seed: u64 = rng.random();
        let mut rng = rng::seeded(seed);
        let n = self.cfg.num_topics;
        let documents = (0..self.cfg.candidate_count as u32)
            .map(|id| {
                let t = sample_topic(self.cfg.doc_topic_weights.as_deref(), n, &mut rng);
                let quality = LogNormal::new(self.quality_means[t], self.cfg.quality_sigma)
                    .expect("validated sigma")
                    .sample(&mut rng);
                Document {
                    id,
                    topics: TopicVector::one_hot(n, t),
                    length: 1.0,
                    quality,
                    observable_quality: None,
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

impl ResponseModel for LatentBanditModel {
    fn scores(&self, state: &UserState, slate: &[Document]) -> Result<Vec<f64>, ChoiceError> {
        slate
            .iter()
            .map(|d| base_score(state, d, self.cfg.affinity_scale))
            .collect()
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
                engagement: 1.0,
                revealed_quality: Some(slate[i].quality),
            },
            None => Response::no_click(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quality_is_positive_and_topics_one_hot() {
        let model = LatentBanditModel::new(LatentBanditConfig::default());
        let mut rng = rng::seeded(2);
        for _ in 0..50 {
            let c = model.sample_corpus(&mut rng);
            assert_eq!(c.len(), 20);
            for d in c.documents() {
                assert!(d.quality > 0.0);
                assert!(d.topics.is_one_hot());
            }
        }
    }

    #[test]
    fn default_quality_has_unit_mean() {
        let cfg = LatentBanditConfig::default();
        let means = cfg.quality_means();
        let avg: f64 = means
            .iter()
            .map(|m| (m + cfg.quality_sigma.powi(2) / 2.0).exp())
            .sum::<f64>()
            / means.len() as f64;
        assert!((avg - 1.0).abs() < 0.05, "{avg}");
    }

    #[test]
    fn interests_stay_static() {
        let model = LatentBanditModel::new(LatentBanditConfig::default());
        let mut rng = rng::seeded(4);
        let u = model.sample_user(&mut rng);
        let c = model.sample_corpus(&mut rng);
        let slate = vec![c.documents()[0].clone()];
        let mut s = u.clone();
        for _ in 0..100 {
            let r = model.respond(&s, &slate, &mut rng).unwrap();
            s = model.transition(&s, &slate, &r, &mut rng);
            assert_eq!(s.interests, u.interests);
        }
        assert_eq!(s.budget, 400.0);
    }

    #[test]
    fn score_adds_quality_to_scaled_affinity() {
        let u = UserState {
            interests: TopicVector::new(vec![0.5, -0.5]),
            budget: 1.0,
            satisfaction: 0.5,
            observable_features: Default::default(),
        };
        let d = Document {
            id: 0,
            topics: TopicVector::one_hot(2, 1),
            length: 1.0,
            quality: 0.75,
            observable_quality: None,
        };
        assert!((base_score(&u, &d, 5.0).unwrap() - (-2.5 + 0.75)).abs() < 1e-12);
    }
}
