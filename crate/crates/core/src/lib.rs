//! slatesim: a simulation engine for sequential slate recommendation.
//!
//! Environments combine a user model, a document model and a response model;
//! agents see only projected observations; the simulator runs the per-turn
//! loop, aggregates metrics and writes JSONL episode logs and checkpoints.

pub mod agents;
pub mod choice;
pub mod config;
pub mod digest;
pub mod envs;
pub mod error;
pub mod layers;
pub mod replay;
pub mod rng;
pub mod sim;
pub mod summary;
pub mod types;
