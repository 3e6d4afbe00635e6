//! Experiment configuration: one JSON document with `env`, `agent`, `layers`,
//! `sim`, an optional `eval_override` and optional display labels.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::{Agent, GreedyAgent, GreedyObjective, QConfig, RandomAgent, TabularQAgent, Ucb1Agent};
use crate::digest::json_digest;
use crate::envs::{EnvConfig, EnvOverride, Environment};
use crate::error::ConfigError;
use crate::layers::{wrap_stack, HierarchicalNode, LayerSpec};
use crate::rng::{self, Phase};
use crate::sim::{LogContext, SimConfig, Simulation};
use crate::types::UserState;

/// What the greedy agent maximizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreedyTarget {
    /// The environment's own myopic objective.
    #[default]
    Auto,
    /// Highest published quality; the kale-only policy.
    Kaleness,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentSpec {
    Random,
    Greedy {
        #[serde(default)]
        objective: GreedyTarget,
    },
    TabularQ(QConfig),
    FullSlateQ(QConfig),
    Ucb1,
    Hierarchical {
        children: Vec<StackSpec>,
        #[serde(default = "default_node_epsilon")]
        epsilon: f64,
        #[serde(default)]
        warmup: u64,
    },
}

fn default_node_epsilon() -> f64 {
    0.1
}

impl AgentSpec {
    /// Row label used by summary tables.
    pub fn label(&self) -> &'static str {
        match self {
            AgentSpec::Random => "Random",
            AgentSpec::Greedy { .. } => "Greedy",
            AgentSpec::TabularQ(_) => "TabularQ",
            AgentSpec::FullSlateQ(_) => "FullSlateQ",
            AgentSpec::Ucb1 => "UCB1",
            AgentSpec::Hierarchical { .. } => "Hierarchical",
        }
    }
}

/// A base agent wrapped in layers, outermost first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackSpec {
    pub agent: AgentSpec,
    #[serde(default)]
    pub layers: Vec<LayerSpec>,
}

impl StackSpec {
    pub fn validate(&self, path: &str, env: &EnvConfig) -> Result<(), ConfigError> {
        for (i, l) in self.layers.iter().enumerate() {
            l.validate(&format!("{path}layers[{i}]"))?;
        }
        match &self.agent {
            AgentSpec::TabularQ(q) | AgentSpec::FullSlateQ(q) => {
                validate_q(q, &format!("{path}agent"))?;
            }
            AgentSpec::Ucb1 => {
                let has_stats = self
                    .layers
                    .iter()
                    .any(|l| matches!(l, LayerSpec::ClusterClickStats { .. }));
                if !has_stats {
                    return Err(ConfigError::new(
                        format!("{path}layers"),
                        "ucb1 needs a cluster_click_stats layer",
                    ));
                }
            }
            AgentSpec::Hierarchical { children, epsilon, .. } => {
                if children.is_empty() {
                    return Err(ConfigError::new(
                        format!("{path}agent.children"),
                        "needs at least one child",
                    ));
                }
                if !(0.0..=1.0).contains(epsilon) {
                    return Err(ConfigError::new(format!("{path}agent.epsilon"), "must lie in [0, 1]"));
                }
                for (i, c) in children.iter().enumerate() {
                    c.validate(&format!("{path}agent.children[{i}]."), env)?;
                }
            }
            AgentSpec::Greedy { objective: GreedyTarget::Kaleness } => {
                if !env.observability().doc.contains("quality") {
                    return Err(ConfigError::new(
                        format!("{path}agent.objective"),
                        "kaleness needs observable document quality",
                    ));
                }
            }
            AgentSpec::Random | AgentSpec::Greedy { .. } => {}
        }
        Ok(())
    }

    pub fn build(&self, env_cfg: &EnvConfig, env: &Environment) -> Box<dyn Agent> {
        let k = env_cfg.slate_size();
        let base: Box<dyn Agent> = match &self.agent {
            AgentSpec::Random => Box::new(RandomAgent::new(k)),
            AgentSpec::Greedy { objective } => Box::new(GreedyAgent::new(k, greedy_objective(*objective, env_cfg, env))),
            AgentSpec::TabularQ(q) => Box::new(TabularQAgent::tabular(q.clone(), k)),
            AgentSpec::FullSlateQ(q) => Box::new(TabularQAgent::full_slate(q.clone(), k)),
            AgentSpec::Ucb1 => Box::new(Ucb1Agent::new(k)),
            AgentSpec::Hierarchical {
                children,
                epsilon,
                warmup,
            } => Box::new(HierarchicalNode::new(
                children.iter().map(|c| c.build(env_cfg, env)).collect(),
                *epsilon,
                *warmup,
            )),
        };
        wrap_stack(base, &self.layers, env_cfg.num_topics())
    }
}

fn validate_q(q: &QConfig, path: &str) -> Result<(), ConfigError> {
    if !(0.0..1.0).contains(&q.discount) {
        return Err(ConfigError::new(format!("{path}.discount"), "must lie in [0, 1)"));
    }
    if !(0.0..=1.0).contains(&q.epsilon) {
        return Err(ConfigError::new(format!("{path}.epsilon"), "must lie in [0, 1]"));
    }
    if q.action_cap == 0 {
        return Err(ConfigError::new(format!("{path}.action_cap"), "must be >= 1"));
    }
    if let Some(fs) = &q.features {
        for (i, f) in fs.iter().enumerate() {
            if f.bins < 1 || f.high.partial_cmp(&f.low) != Some(std::cmp::Ordering::Greater) {
                return Err(ConfigError::new(
                    format!("{path}.features[{i}]"),
                    "needs bins >= 1 and high > low",
                ));
            }
        }
    }
    Ok(())
}

fn greedy_objective(target: GreedyTarget, cfg: &EnvConfig, env: &Environment) -> GreedyObjective {
    match (target, cfg) {
        (GreedyTarget::Kaleness, _) => GreedyObjective::Kaleness,
        (GreedyTarget::Auto, EnvConfig::ChocKale(c)) => GreedyObjective::ExpectedEngagement(c.clone()),
        (GreedyTarget::Auto, EnvConfig::LatentBandit(c)) => expected_choice(env, c.user_prior.mean(c.num_topics)),
        (GreedyTarget::Auto, EnvConfig::InterestEvolution(c)) => {
            expected_choice(env, c.user_prior.mean(c.num_topics))
        }
    }
}

fn expected_choice(env: &Environment, mean: crate::types::TopicVector) -> GreedyObjective {
    let choice = env.responses.choice_config();
    GreedyObjective::ExpectedChoice {
        model: env.responses.clone(),
        mean_user: UserState {
            interests: mean,
            budget: 1.0,
            satisfaction: 0.5,
            observable_features: Default::default(),
        },
        transform: GreedyAgent::transform_for(choice.kind, choice.score_fn),
    }
}

/// Labels for summary tables; derived from the config when absent.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub agent: AgentSpec,
    /// Outermost first.
    #[serde(default)]
    pub layers: Vec<LayerSpec>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_override: Option<EnvOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<RunMeta>,
}

/// Deserializes JSON, reporting the failing path.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "$".to_string() } else { path };
        ConfigError::new(path, e.into_inner().to_string())
    })
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = parse_json(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// A missing or unreadable file is reported against the file path.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.env.validate("env")?;
        self.sim.validate("sim")?;
        if let Some(ov) = &self.eval_override {
            validate_override(ov, &self.env, "eval_override")?;
        }
        self.stack().validate("", &self.env)
    }

    pub fn stack(&self) -> StackSpec {
        StackSpec {
            agent: self.agent.clone(),
            layers: self.layers.clone(),
        }
    }

    /// Digest of everything that can change a result. Worker count and log
    /// switches are left out.
    pub fn digest(&self) -> String {
        let mut cfg = self.clone();
        cfg.sim.parallel_eval_workers = 1;
        cfg.sim.log_train_episodes = true;
        cfg.sim.log_eval_episodes = true;
        json_digest(&cfg)
    }

    pub fn log_context(&self) -> LogContext {
        LogContext {
            config_digest: self.digest(),
            env_digest: json_digest(&self.env),
            agent_digest: json_digest(&self.stack()),
        }
    }

    /// Seed of the corpus shared by all episodes when it is not resampled.
    pub fn corpus_seed(&self) -> u64 {
        rng::episode_seed(self.sim.seed, Phase::Train, u64::MAX)
    }

    pub fn build_env(&self) -> Environment {
        self.env.build(self.corpus_seed())
    }

    /// The evaluation environment: the training one with the configured
    /// override, then `extra`, applied.
    pub fn build_eval_env(&self, extra: Option<&EnvOverride>) -> Environment {
        let mut cfg = self.env.clone();
        if let Some(ov) = &self.eval_override {
            cfg = cfg.with_override(ov);
        }
        if let Some(ov) = extra {
            cfg = cfg.with_override(ov);
        }
        cfg.build(self.corpus_seed())
    }

    pub fn build_agent(&self, env: &Environment) -> Box<dyn Agent> {
        self.stack().build(&self.env, env)
    }

    pub fn simulation(&self) -> Simulation {
        let env = self.build_env();
        let agent = self.build_agent(&env);
        Simulation::new(env, agent, self.sim.clone(), self.log_context())
    }

    pub fn strategy_label(&self) -> String {
        self.meta
            .as_ref()
            .and_then(|m| m.strategy.clone())
            .unwrap_or_else(|| self.agent.label().to_string())
    }

    pub fn environment_label(&self) -> String {
        self.meta
            .as_ref()
            .and_then(|m| m.environment.clone())
            .unwrap_or_else(|| self.env.label())
    }
}

pub fn validate_override(ov: &EnvOverride, env: &EnvConfig, path: &str) -> Result<(), ConfigError> {
    if let Some(c) = &ov.choice {
        c.validate(&format!("{path}.choice"))?;
    }
    if let Some(p) = &ov.user_prior {
        p.validate(env.num_topics(), &format!("{path}.user_prior"))?;
    }
    Ok(())
}
