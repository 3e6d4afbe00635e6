//! Packaged environments and the component contracts they are assembled from.
//!
//! An [`Environment`] bundles a user model (prior + transition + termination),
//! a document model, a response model (choice + engagement) and a reward
//! definition. The signatures keep each component on its side of the
//! information boundary: the response model sees the full user state and the
//! slate, the user model sees state, slate and response, and nothing here ever
//! touches an agent.

use std::fmt::Debug;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::choice::ChoiceConfig;
use crate::error::{ChoiceError, ConfigError};
use crate::rng::{self, SimRng};
use crate::types::{
    project_observation, Corpus, Document, Observability, Observation, Response, Slate, TopicVector,
    UserState,
};

pub mod choc_kale;
pub mod interest_evolution;
pub mod latent_bandit;

pub use choc_kale::ChocKaleConfig;
pub use interest_evolution::InterestEvolutionConfig;
pub use latent_bandit::LatentBanditConfig;

pub trait UserModel: Send + Sync + Debug {
    fn sample_user(&self, rng: &mut SimRng) -> UserState;
    fn transition(
        &self,
        state: &UserState,
        slate: &[Document],
        response: &Response,
        rng: &mut SimRng,
    ) -> UserState;
    fn is_terminal(&self, state: &UserState, step: usize) -> bool;
}

pub trait DocumentModel: Send + Sync + Debug {
    fn sample_corpus(&self, rng: &mut SimRng) -> Corpus;
}

/// Generates the user's choice and engagement for a slate.
pub trait ResponseModel: Send + Sync + Debug {
    /// Base score of each slate document before any choice transformation.
    fn scores(&self, state: &UserState, slate: &[Document]) -> Result<Vec<f64>, ChoiceError>;
    fn choice_config(&self) -> &ChoiceConfig;
    fn respond(
        &self,
        state: &UserState,
        slate: &[Document],
        rng: &mut SimRng,
    ) -> Result<Response, ChoiceError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    /// 1 per click.
    Clicks,
    /// Engagement of the consumed document.
    Engagement,
}

impl RewardKind {
    pub fn reward(&self, response: &Response) -> f64 {
        match self {
            RewardKind::Clicks => f64::from(u8::from(response.is_click())),
            RewardKind::Engagement => {
                if response.is_click() {
                    response.engagement
                } else {
                    0.0
                }
            }
        }
    }
}

/// Episode terminates on an exhausted budget or on reaching the length cap.
pub fn is_terminal(state: &UserState, step: usize, episode_length: usize) -> bool {
    state.budget <= 0.0 || step >= episode_length
}

/// Prior over user interest vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum UserPrior {
    /// Independent uniform interest per topic.
    Uniform { low: f64, high: f64 },
    PointMass { interests: Vec<f64> },
}

impl Default for UserPrior {
    fn default() -> Self {
        UserPrior::Uniform {
            low: -1.0,
            high: 1.0,
        }
    }
}

impl UserPrior {
    pub fn sample(&self, num_topics: usize, rng: &mut SimRng) -> TopicVector {
        match self {
            UserPrior::Uniform { low, high } => {
                if low == high {
                    return TopicVector::new(vec![*low; num_topics]);
                }
                let dist = Uniform::new_inclusive(*low, *high).expect("validated range");
                TopicVector::new((0..num_topics).map(|_| dist.sample(rng)).collect())
            }
            UserPrior::PointMass { interests } => TopicVector::new(interests.clone()),
        }
    }

    pub fn mean(&self, num_topics: usize) -> TopicVector {
        match self {
            UserPrior::Uniform { low, high } => TopicVector::new(vec![(low + high) / 2.0; num_topics]),
            UserPrior::PointMass { interests } => TopicVector::new(interests.clone()),
        }
    }

    pub fn validate(&self, num_topics: usize, path: &str) -> Result<(), ConfigError> {
        match self {
            UserPrior::Uniform { low, high } => {
                if !(-1.0 <= *low && low <= high && *high <= 1.0) {
                    return Err(ConfigError::new(
                        path,
                        format!("uniform range [{low}, {high}] must satisfy -1 <= low <= high <= 1"),
                    ));
                }
            }
            UserPrior::PointMass { interests } => {
                if interests.len() != num_topics {
                    return Err(ConfigError::new(
                        format!("{path}.interests"),
                        format!("expected {num_topics} entries, got {}", interests.len()),
                    ));
                }
                if interests.iter().any(|v| !(-1.0..=1.0).contains(v)) {
                    return Err(ConfigError::new(
                        format!("{path}.interests"),
                        "entries must lie in [-1, 1]",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Categorical topic prior for documents; `None` weights mean uniform.
pub(crate) fn sample_topic(weights: Option<&[f64]>, num_topics: usize, rng: &mut SimRng) -> usize {
    match weights {
        None => rng.random_range(0..num_topics),
        Some(w) => {
            let total: f64 = w.iter().sum();
            let mut u = rng.random::<f64>() * total;
            for (t, &wt) in w.iter().enumerate() {
                if u < wt {
                    return t;
                }
                u -= wt;
            }
            w.iter().rposition(|&x| x > 0.0).unwrap_or(0)
        }
    }
}

pub(crate) fn validate_topic_weights(
    weights: Option<&[f64]>,
    num_topics: usize,
    path: &str,
) -> Result<(), ConfigError> {
    if let Some(w) = weights {
        if w.len() != num_topics {
            return Err(ConfigError::new(
                path,
                format!("expected {num_topics} weights, got {}", w.len()),
            ));
        }
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(ConfigError::new(path, "weights must be non-negative with a positive sum"));
        }
    }
    Ok(())
}

pub(crate) fn validate_observability(vis: &Observability, path: &str) -> Result<(), ConfigError> {
    for field in &vis.doc {
        check(
            crate::types::DOC_FIELDS.contains(&field.as_str()),
            format!("{path}.doc"),
            format!("unknown document field {field:?}"),
        )?;
    }
    Ok(())
}

pub(crate) fn check(cond: bool, path: impl Into<String>, message: impl Into<String>) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(ConfigError::new(path, message))
    }
}

/// Environment configuration as it appears in an experiment file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    InterestEvolution(InterestEvolutionConfig),
    LatentBandit(LatentBanditConfig),
    ChocKale(ChocKaleConfig),
}

/// Evaluation-time substitutions, e.g. a different choice model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<ChoiceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_prior: Option<UserPrior>,
}

impl EnvConfig {
    pub fn validate(&self, path: &str) -> Result<(), ConfigError> {
        match self {
            EnvConfig::InterestEvolution(c) => c.validate(path),
            EnvConfig::LatentBandit(c) => c.validate(path),
            EnvConfig::ChocKale(c) => c.validate(path),
        }
    }

    pub fn build(&self, corpus_seed: u64) -> Environment {
        match self {
            EnvConfig::InterestEvolution(c) => c.build(corpus_seed),
            EnvConfig::LatentBandit(c) => c.build(corpus_seed),
            EnvConfig::ChocKale(c) => c.build(corpus_seed),
        }
    }

    pub fn with_override(&self, ov: &EnvOverride) -> EnvConfig {
        let mut out = self.clone();
        match &mut out {
            EnvConfig::InterestEvolution(c) => {
                if let Some(ch) = &ov.choice {
                    c.choice = ch.clone();
                }
                if let Some(p) = &ov.user_prior {
                    c.user_prior = p.clone();
                }
            }
            EnvConfig::LatentBandit(c) => {
                if let Some(ch) = &ov.choice {
                    c.choice = ch.clone();
                }
                if let Some(p) = &ov.user_prior {
                    c.user_prior = p.clone();
                }
            }
            EnvConfig::ChocKale(c) => {
                if let Some(ch) = &ov.choice {
                    c.choice = ch.clone();
                }
            }
        }
        out
    }

    pub fn slate_size(&self) -> usize {
        match self {
            EnvConfig::InterestEvolution(c) => c.slate_size,
            EnvConfig::LatentBandit(c) => c.slate_size,
            EnvConfig::ChocKale(c) => c.slate_size,
        }
    }

    pub fn num_topics(&self) -> usize {
        match self {
            EnvConfig::InterestEvolution(c) => c.num_topics,
            EnvConfig::LatentBandit(c) => c.num_topics,
            EnvConfig::ChocKale(c) => c.num_topics,
        }
    }

    pub fn observability(&self) -> &Observability {
        match self {
            EnvConfig::LatentBandit(c) => &c.observability,
            EnvConfig::InterestEvolution(c) => &c.observability,
            EnvConfig::ChocKale(c) => &c.observability,
        }
    }

    pub fn label(&self) -> String {
        match self {
            EnvConfig::InterestEvolution(_) => "Interest Evolution".to_string(),
            EnvConfig::LatentBandit(c) => {
                if c.affinity_scale >= 1.0 {
                    "High Topic Affinity".to_string()
                } else {
                    "Low Topic Affinity".to_string()
                }
            }
            EnvConfig::ChocKale(_) => "Chocolate/Kale".to_string(),
        }
    }
}

/// A runnable environment instance. Cloning is cheap; models are shared.
#[derive(Clone, Debug)]
pub struct Environment {
    pub users: Arc<dyn UserModel>,
    pub documents: Arc<dyn DocumentModel>,
    pub responses: Arc<dyn ResponseModel>,
    pub reward: RewardKind,
    pub observability: Observability,
    pub slate_size: usize,
    fixed_corpus: Option<Corpus>,
    state: Option<UserState>,
    corpus: Option<Corpus>,
}

impl Environment {
    /// With `resample_corpus` unset the corpus is drawn once from `corpus_seed`
    /// and shared by every episode.
    pub fn new(
        users: Arc<dyn UserModel>,
        documents: Arc<dyn DocumentModel>,
        responses: Arc<dyn ResponseModel>,
        reward: RewardKind,
        observability: Observability,
        slate_size: usize,
        resample_corpus: bool,
        corpus_seed: u64,
    ) -> Self {
        let fixed_corpus =
            (!resample_corpus).then(|| documents.sample_corpus(&mut rng::seeded(corpus_seed)));
        Self {
            users,
            documents,
            responses,
            reward,
            observability,
            slate_size,
            fixed_corpus,
            state: None,
            corpus: None,
        }
    }

    /// Samples a fresh user (and corpus, unless it is held fixed).
    pub fn reset(&mut self, rng: &mut SimRng) {
        let corpus = match &self.fixed_corpus {
            Some(c) => c.clone(),
            None => self.documents.sample_corpus(rng),
        };
        self.state = Some(self.users.sample_user(rng));
        self.corpus = Some(corpus);
    }

    pub fn user_state(&self) -> &UserState {
        self.state.as_ref().expect("environment not reset")
    }

    pub fn corpus(&self) -> &Corpus {
        self.corpus.as_ref().expect("environment not reset")
    }

    pub fn set_user_state(&mut self, state: UserState) {
        self.state = Some(state);
    }

    pub fn observe(&self, last_response: Option<&Response>) -> Observation {
        project_observation(self.user_state(), self.corpus(), &self.observability, last_response)
    }

    pub fn is_terminal(&self, step: usize) -> bool {
        self.users.is_terminal(self.user_state(), step)
    }

    /// Documents of a validated slate, in slate order.
    pub fn slate_documents(&self, slate: &Slate) -> Vec<Document> {
        self.corpus()
            .resolve(slate)
            .expect("slate validated before resolution")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_definitions() {
        let click = Response {
            chosen_index: Some(0),
            engagement: 3.2,
            revealed_quality: None,
        };
        assert_eq!(RewardKind::Clicks.reward(&click), 1.0);
        assert_eq!(RewardKind::Clicks.reward(&Response::no_click()), 0.0);
        assert_eq!(RewardKind::Engagement.reward(&click), 3.2);
    }

    #[test]
    fn termination_rule() {
        let mut s = UserState {
            interests: TopicVector::zeros(1),
            budget: 0.0,
            satisfaction: 0.5,
            observable_features: Default::default(),
        };
        assert!(is_terminal(&s, 0, 10));
        s.budget = 5.0;
        assert!(is_terminal(&s, 10, 10));
        assert!(!is_terminal(&s, 0, 10));
    }

    #[test]
    fn point_mass_prior_is_exact() {
        let p = UserPrior::PointMass {
            interests: vec![0.25, -0.5],
        };
        let mut rng = rng::seeded(3);
        assert_eq!(p.sample(2, &mut rng).entries(), &[0.25, -0.5]);
    }

    #[test]
    fn uniform_prior_is_centered() {
        // 3σ for the mean of 1e4 U[-1,1] draws is 3 * 0.577 / 100 ≈ 0.017
        let p = UserPrior::default();
        let mut rng = rng::seeded(11);
        let n = 10_000;
        let mut sums = [0.0; 3];
        for _ in 0..n {
            let u = p.sample(3, &mut rng);
            for (s, v) in sums.iter_mut().zip(u.entries()) {
                *s += v;
            }
        }
        for s in sums {
            assert!((s / n as f64).abs() < 0.03);
        }
    }
}
