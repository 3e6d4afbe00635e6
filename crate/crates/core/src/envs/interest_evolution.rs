//! Interest-evolution environment.
//!
//! Users hold interests in `[-1,1]` per topic that drift after each
//! consumption, and a time budget that shrinks by the document length less an
//! appeal-dependent bonus.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    check, sample_topic, validate_topic_weights, DocumentModel, Environment, ResponseModel,
    RewardKind, UserModel, UserPrior,
};
use crate::choice::{self, choice_distribution, sample_choice, ChoiceConfig};
use crate::digest::json_digest;
use crate::error::{ChoiceError, ConfigError};
use crate::rng::{self, SimRng};
use crate::types::{
    Corpus, Document, Observability, Provenance, Response, TopicVector, UserState,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterestEvolutionConfig {
    pub num_topics: usize,
    pub one_hot_topics: bool,
    pub doc_length: f64,
    /// Per-topic mean quality; defaults to an even spread over `[-1, 1]`.
    pub quality_means: Option<Vec<f64>>,
    pub quality_stddev: f64,
    /// Weight of quality versus interest in the satisfaction score.
    pub satisfaction_weight: f64,
    /// Fraction of the distance to the pole covered by one nudge.
    pub nudge_fraction: f64,
    pub positive_nudge_prob: f64,
    pub initial_budget: f64,
    pub bonus_coefficient: f64,
    /// Budget spent on a turn without a click.
    pub no_click_cost: f64,
    pub user_prior: UserPrior,
    pub doc_topic_weights: Option<Vec<f64>>,
    pub slate_size: usize,
    pub candidate_count: usize,
    pub episode_length: usize,
    pub resample_corpus: bool,
    pub choice: ChoiceConfig,
    pub observability: Observability,
}

impl Default for InterestEvolutionConfig {
    fn default() -> Self {
        Self {
            num_topics: 10,
            one_hot_topics: true,
            doc_length: 4.0,
            quality_means: None,
            quality_stddev: 0.1,
            satisfaction_weight: 0.5,
            nudge_fraction: 0.3,
            positive_nudge_prob: 0.9,
            initial_budget: 200.0,
            bonus_coefficient: 0.5,
            no_click_cost: 0.5,
            user_prior: UserPrior::default(),
            doc_topic_weights: None,
            slate_size: 3,
            candidate_count: 10,
            episode_length: 1000,
            resample_corpus: true,
            choice: ChoiceConfig::logit(),
            observability: Observability::default(),
        }
    }
}

impl InterestEvolutionConfig {
    pub fn quality_means(&self) -> Vec<f64> {
        match &self.quality_means {
            Some(m) => m.clone(),
            None if self.num_topics == 1 => vec![0.0],
            None => (0..self.num_topics)
                .map(|t| -1.0 + 2.0 * t as f64 / (self.num_topics - 1) as f64)
                .collect(),
        }
    }

    pub fn validate(&self, path: &str) -> Result<(), ConfigError> {
        check(self.num_topics >= 1, format!("{path}.num_topics"), "must be >= 1")?;
        check(self.doc_length > 0.0, format!("{path}.doc_length"), "must be > 0")?;
        if let Some(m) = &self.quality_means {
            check(
                m.len() == self.num_topics,
                format!("{path}.quality_means"),
                format!("expected {} entries", self.num_topics),
            )?;
        }
        check(self.quality_stddev >= 0.0, format!("{path}.quality_stddev"), "must be >= 0")?;
        check(
            (0.0..=1.0).contains(&self.satisfaction_weight),
            format!("{path}.satisfaction_weight"),
            "must lie in [0, 1]",
        )?;
        check(
            (0.0..=1.0).contains(&self.nudge_fraction),
            format!("{path}.nudge_fraction"),
            "must lie in [0, 1]",
        )?;
        check(
            (0.0..=1.0).contains(&self.positive_nudge_prob),
            format!("{path}.positive_nudge_prob"),
            "must lie in [0, 1]",
        )?;
        check(self.initial_budget > 0.0, format!("{path}.initial_budget"), "must be > 0")?;
        // satisfaction is clipped to [0,1], so this keeps the bonus below the length
        check(
            (0.0..1.0).contains(&self.bonus_coefficient),
            format!("{path}.bonus_coefficient"),
            "must lie in [0, 1)",
        )?;
        check(self.no_click_cost > 0.0, format!("{path}.no_click_cost"), "must be > 0")?;
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
        super::validate_observability(&self.observability, &format!("{path}.observability"))
    }

    pub fn build(&self, corpus_seed: u64) -> Environment {
        let model = Arc::new(InterestEvolutionModel::new(self.clone()));
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
}

/// `S(u,d) = (1-α)·I(u,d) + α·L_d`.
pub fn satisfaction(user: &UserState, doc: &Document, alpha: f64) -> f64 {
    let interest = user
        .interests
        .dot(&doc.topics)
        .expect("topic dimensions fixed by the environment");
    (1.0 - alpha) * interest + alpha * doc.quality
}

/// Nudge magnitude `y·(1-|I|)·|I|`.
pub fn nudge_magnitude(interest: f64, fraction: f64) -> f64 {
    fraction * (1.0 - interest.abs()) * interest.abs()
}

/// Moves `interest` toward its pole when `reinforce`, toward zero otherwise.
pub fn nudge_interest(interest: f64, fraction: f64, reinforce: bool) -> f64 {
    let step = nudge_magnitude(interest, fraction) * interest.signum();
    let next = if reinforce {
        interest + step
    } else {
        interest - step
    };
    next.clamp(-1.0, 1.0)
}

/// Bonus `β_b·ℓ(d)·clip(S, 0, 1)` returned to the budget on consumption.
pub fn consumption_bonus(length: f64, satisfaction: f64, coefficient: f64) -> f64 {
    coefficient * length * satisfaction.clamp(0.0, 1.0)
}

#[derive(Debug)]
pub struct InterestEvolutionModel {
    cfg: InterestEvolutionConfig,
    quality_means: Vec<f64>,
    digest: String,
}

impl InterestEvolutionModel {
    pub fn new(cfg: InterestEvolutionConfig) -> Self {
        Self {
            quality_means: cfg.quality_means(),
            digest: json_digest(&cfg),
            cfg,
        }
    }

    pub fn config(&self) -> &InterestEvolutionConfig {
        &self.cfg
    }
}

impl UserModel for InterestEvolutionModel {
    fn sample_user(&self, rng: &mut SimRng) -> UserState {
        UserState {
            interests: self.cfg.user_prior.sample(self.cfg.num_topics, rng),
            budget: self.cfg.initial_budget,
            satisfaction: 0.5,
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
        let Some(doc) = response.chosen_index.and_then(|i| slate.get(i)) else {
            next.budget = (state.budget - self.cfg.no_click_cost).max(0.0);
            return next;
        };
        let topic = doc.topic();
        let reinforce = rng.random::<f64>() < self.cfg.positive_nudge_prob;
        let current = state.interests.entries()[topic];
        next.interests.entries_mut()[topic] =
            nudge_interest(current, self.cfg.nudge_fraction, reinforce);

        let s = satisfaction(state, doc, self.cfg.satisfaction_weight);
        let bonus = consumption_bonus(doc.length, s, self.cfg.bonus_coefficient);
        next.budget = (state.budget - doc.length + bonus).max(0.0);
        next
    }

    fn is_terminal(&self, state: &UserState, step: usize) -> bool {
        super::is_terminal(state, step, self.cfg.episode_length)
    }
}

impl DocumentModel for InterestEvolutionModel {
    fn sample_corpus(&self, rng: &mut SimRng) -> Corpus {
        let seed: u64 = rng.random();
        let mut rng = rng::seeded(seed);
        let n = self.cfg.num_topics;
        let documents = (0..self.cfg.candidate_count as u32)
            .map(|id| {
                let t = sample_topic(self.cfg.doc_topic_weights.as_deref(), n, &mut rng);
                let topics = if self.cfg.one_hot_topics {
                    TopicVector::one_hot(n, t)
                } else {
                    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                    v[t] = 1.0;
                    TopicVector::new(v)
                };
                let quality = Normal::new(self.quality_means[t], self.cfg.quality_stddev)
                    .expect("validated stddev")
                    .sample(&mut rng);
                Document {
                    id,
                    topics,
                    length: self.cfg.doc_length,
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

impl ResponseModel for InterestEvolutionModel {
    fn scores(&self, state: &UserState, slate: &[Document]) -> Result<Vec<f64>, ChoiceError> {
        slate.iter().map(|d| choice::score(state, d)).collect()
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
                engagement: slate[i].length.min(state.budget),
                revealed_quality: Some(slate[i].quality),
            },
            None => Response::no_click(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user(interests: Vec<f64>, budget: f64) -> UserState {
        UserState {
            interests: TopicVector::new(interests),
            budget,
            satisfaction: 0.5,
            observable_features: Default::default(),
        }
    }

    fn doc(topic: usize, quality: f64, length: f64) -> Document {
        Document {
            id: 0,
            topics: TopicVector::one_hot(2, topic),
            length,
            quality,
            observable_quality: None,
        }
    }

    #[test]
    fn satisfaction_endpoints_and_midpoint() {
        let u = user(vec![0.2, 0.0], 1.0);
        let d = doc(0, 0.8, 1.0);
        assert_eq!(satisfaction(&u, &d, 0.0), 0.2);
        assert_eq!(satisfaction(&u, &d, 1.0), 0.8);
        assert!((satisfaction(&u, &d, 0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nudge_magnitude_cases() {
        assert_eq!(nudge_magnitude(1.0, 0.3), 0.0);
        assert_eq!(nudge_magnitude(0.0, 0.3), 0.0);
        assert!((nudge_magnitude(0.5, 0.3) - 0.075).abs() < 1e-12);
        assert!((nudge_interest(0.5, 0.3, true) - 0.575).abs() < 1e-12);
        assert!((nudge_interest(-0.5, 0.3, true) + 0.575).abs() < 1e-12);
        assert!((nudge_interest(0.5, 0.3, false) - 0.425).abs() < 1e-12);
    }

    #[test]
    fn budget_drops_by_length_less_bonus() {
        let bonus = consumption_bonus(4.0, 1.0, 0.2);
        assert!((4.0 - bonus - 3.2).abs() < 1e-12);

        let cfg = InterestEvolutionConfig {
            bonus_coefficient: 0.2,
            satisfaction_weight: 1.0,
            num_topics: 2,
            ..Default::default()
        };
        let model = InterestEvolutionModel::new(cfg);
        let u = user(vec![0.0, 0.0], 10.0);
        let slate = vec![doc(0, 1.0, 4.0)];
        let r = Response {
            chosen_index: Some(0),
            engagement: 4.0,
            revealed_quality: Some(1.0),
        };
        let next = model.transition(&u, &slate, &r, &mut rng::seeded(0));
        assert!((next.budget - 6.8).abs() < 1e-12);
    }

    #[test]
    fn no_click_costs_fixed_time() {
        let model = InterestEvolutionModel::new(InterestEvolutionConfig {
            num_topics: 2,
            ..Default::default()
        });
        let u = user(vec![0.3, 0.0], 10.0);
        let next = model.transition(&u, &[doc(0, 0.0, 4.0)], &Response::no_click(), &mut rng::seeded(0));
        assert_eq!(next.budget, 9.5);
        assert_eq!(next.interests, u.interests);
    }

    #[test]
    fn zero_stddev_quality_is_the_topic_mean() {
        let cfg = InterestEvolutionConfig {
            quality_stddev: 0.0,
            num_topics: 3,
            candidate_count: 30,
            ..Default::default()
        };
        let means = cfg.quality_means();
        let model = InterestEvolutionModel::new(cfg);
        let corpus = model.sample_corpus(&mut rng::seeded(5));
        for d in corpus.documents() {
            assert_eq!(d.quality, means[d.topic()]);
            assert!(d.topics.is_one_hot());
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let model = InterestEvolutionModel::new(InterestEvolutionConfig::default());
        let a = model.sample_corpus(&mut rng::seeded(9));
        let b = model.sample_corpus(&mut rng::seeded(9));
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
        let ua = model.sample_user(&mut rng::seeded(9));
        let ub = model.sample_user(&mut rng::seeded(9));
        assert_eq!(serde_json::to_vec(&ua).unwrap(), serde_json::to_vec(&ub).unwrap());
    }

    #[test]
    fn topic_frequencies_follow_uniform_prior() {
        // 1e3 corpora of 10 docs: topic-0 share has sd sqrt(.25/1e4) = .005
        let model = InterestEvolutionModel::new(InterestEvolutionConfig {
            num_topics: 2,
            ..Default::default()
        });
        let mut rng = rng::seeded(1);
        let mut zero = 0usize;
        for _ in 0..1000 {
            let c = model.sample_corpus(&mut rng);
            zero += c.documents().iter().filter(|d| d.topic() == 0).count();
        }
        assert!((zero as f64 / 10_000.0 - 0.5).abs() < 0.05);
    }

    #[test]
    fn invalid_bonus_rejected_with_path() {
        let cfg = InterestEvolutionConfig {
            bonus_coefficient: 1.0,
            ..Default::default()
        };
        let err = cfg.validate("env").unwrap_err();
        assert_eq!(err.path, "env.bonus_coefficient");
    }
}
