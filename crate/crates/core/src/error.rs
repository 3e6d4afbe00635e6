use thiserror::Error;

use crate::types::DocId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SlateError {
    #[error("slate contains document {0} more than once")]
    DuplicateItem(DocId),
    #[error("document {0} is not in the candidate corpus")]
    UnknownDocument(DocId),
    #[error("slate is empty")]
    EmptySlate,
    #[error("corpus is empty")]
    EmptyCorpus,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChoiceError {
    #[error("topic vector length mismatch: user has {user} topics, document has {document}")]
    DimensionMismatch { user: usize, document: usize },
    #[error("conditional choice needs non-negative transformed scores, got {0}")]
    InvalidScore(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("corpus has {available} documents but the slate needs {needed}")]
    CorpusTooSmall { needed: usize, available: usize },
    #[error("slate enumeration needs {count} actions, above the cap of {cap}")]
    ActionSpaceOverflow { count: u128, cap: u64 },
    #[error("hierarchical node has no child agents")]
    NoChildren,
    #[error("agent needs click statistics; stack a cluster_click_stats layer below it")]
    MissingClickStats,
    #[error("agent needs the document oracle but none was provided")]
    MissingOracle,
    #[error(transparent)]
    Choice(#[from] ChoiceError),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint is corrupt: {0}")]
    Corrupt(String),
    #[error("checkpoint mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: String, found: String },
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

/// Configuration error naming the offending JSON path.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("episode {episode}, turn {turn}: {source}")]
    Slate {
        episode: u64,
        turn: usize,
        #[source]
        source: SlateError,
    },
    #[error("episode {episode}, turn {turn}: {source}")]
    Agent {
        episode: u64,
        turn: usize,
        #[source]
        source: AgentError,
    },
    #[error("episode {episode}, turn {turn}: {source}")]
    Choice {
        episode: u64,
        turn: usize,
        #[source]
        source: ChoiceError,
    },
    #[error("log io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}
