//! Hierarchical agent layers.
//!
//! Every layer wraps a boxed [`Agent`] and is itself an [`Agent`], so layers
//! stack recursively. Layers only ever see what their enclosing agent sees;
//! their statistics live here and never reach the environment.

use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::error::ConfigError;

mod cluster_click_stats;
mod fixed_length_history;
mod hierarchical;
mod temporal_aggregation;

pub use cluster_click_stats::ClusterClickStats;
pub use fixed_length_history::FixedLengthHistory;
pub use hierarchical::HierarchicalNode;
pub use temporal_aggregation::{slate_features, TemporalAggregation};

/// One wrapper in a layer stack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    ClusterClickStats {
        #[serde(default)]
        persist_across_episodes: bool,
    },
    FixedLengthHistory {
        window: usize,
    },
    TemporalAggregation {
        period: usize,
        #[serde(default)]
        switching_cost: f64,
    },
}

impl LayerSpec {
    pub fn validate(&self, path: &str) -> Result<(), ConfigError> {
        match *self {
            LayerSpec::ClusterClickStats { .. } => Ok(()),
            LayerSpec::FixedLengthHistory { window } if window < 1 => {
                Err(ConfigError::new(format!("{path}.window"), "must be >= 1"))
            }
            LayerSpec::TemporalAggregation { period, .. } if period < 1 => {
                Err(ConfigError::new(format!("{path}.period"), "must be >= 1"))
            }
            LayerSpec::TemporalAggregation { switching_cost, .. }
                if !switching_cost.is_finite() || switching_cost < 0.0 =>
            {
                Err(ConfigError::new(format!("{path}.switching_cost"), "must be finite and >= 0"))
            }
            _ => Ok(()),
        }
    }

    pub fn wrap(&self, base: Box<dyn Agent>, num_topics: usize) -> Box<dyn Agent> {
        match *self {
            LayerSpec::ClusterClickStats {
                persist_across_episodes,
            } => Box::new(ClusterClickStats::new(base, num_topics, persist_across_episodes)),
            LayerSpec::FixedLengthHistory { window } => {
                Box::new(FixedLengthHistory::new(base, window))
            }
            LayerSpec::TemporalAggregation {
                period,
                switching_cost,
            } => Box::new(TemporalAggregation::new(base, period, switching_cost)),
        }
    }
}

/// Wraps `base` in `layers`, listed outermost first.
pub fn wrap_stack(base: Box<dyn Agent>, layers: &[LayerSpec], num_topics: usize) -> Box<dyn Agent> {
    layers
        .iter()
        .rev()
        .fold(base, |agent, layer| layer.wrap(agent, num_topics))
}
