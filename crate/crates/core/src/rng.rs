//! Reproducible random streams.
//!
//! Every episode owns independent environment and agent streams derived from
//! `(master seed, phase, episode index)`, so scheduling or parallelism never
//! perturbs results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type SimRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Train,
    Eval,
}

impl Phase {
    fn tag(self) -> u64 {
        match self {
            Phase::Train => 0x7472_6169_6e00_0000,
            Phase::Eval => 0x6576_616c_0000_0000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Environment,
    Agent,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed recorded in the episode log header.
pub fn episode_seed(master: u64, phase: Phase, episode: u64) -> u64 {
    splitmix64(splitmix64(master ^ phase.tag()) ^ splitmix64(episode.wrapping_add(1)))
}

pub fn stream(episode_seed: u64, stream: Stream) -> SimRng {
    let salt = match stream {
        Stream::Environment => 0x0065_6e76,
        Stream::Agent => 0x0061_6765_6e74,
    };
    SimRng::seed_from_u64(splitmix64(episode_seed ^ salt))
}

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
