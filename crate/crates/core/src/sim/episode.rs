use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::envs::Environment;
use crate::error::SimError;
use crate::rng::{self, Phase, Stream};
use crate::types::{validate_slate, DocId, Observation, Response};

/// Digests identifying the configuration that produced a log.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogContext {
    pub config_digest: String,
    pub env_digest: String,
    pub agent_digest: String,
}

/// First line of every logged episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeHeader {
    pub episode: u64,
    pub seed: u64,
    pub config_digest: String,
    pub env_digest: String,
    pub agent_digest: String,
    pub phase: Phase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnRecord {
    pub t: usize,
    pub obs: Observation,
    pub slate: Vec<DocId>,
    pub response: Response,
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalRecord {
    pub terminal: bool,
    pub turns: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub header: EpisodeHeader,
    pub turns: Vec<TurnRecord>,
    pub terminal: bool,
}

impl EpisodeLog {
    pub fn cumulative_reward(&self) -> f64 {
        self.turns.iter().map(|t| t.reward).sum()
    }

    /// Header line, one line per turn, then the terminal line.
    pub fn write_jsonl(&self, w: &mut dyn Write) -> std::io::Result<()> {
        serde_json::to_writer(&mut *w, &self.header)?;
        w.write_all(b"\n")?;
        for turn in &self.turns {
            serde_json::to_writer(&mut *w, turn)?;
            w.write_all(b"\n")?;
        }
        serde_json::to_writer(
            &mut *w,
            &TerminalRecord {
                terminal: self.terminal,
                turns: self.turns.len(),
            },
        )?;
        w.write_all(b"\n")
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }
}

/// Per-episode aggregates feeding the metrics rows.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub reward: f64,
    pub turns: usize,
    pub clicks: usize,
    /// Distinct topics among recommended documents.
    pub distinct_topics: usize,
}

#[derive(Clone, Debug)]
pub struct EpisodeOutcome {
    pub summary: EpisodeSummary,
    pub log: Option<EpisodeLog>,
}

/// Identifies an episode for seeding and logging.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpisodeId {
    pub master_seed: u64,
    pub phase: Phase,
    pub index: u64,
}

impl EpisodeId {
    pub fn seed(&self) -> u64 {
        rng::episode_seed(self.master_seed, self.phase, self.index)
    }
}

/// Runs one episode to termination.
///
/// Each turn: (1) the environment holds the full user state and corpus,
/// (2) the agent receives the projected observation, (3) returns a slate
/// which is validated, (4) the response model receives the full state and
/// the slate documents, (5) samples a response, and (6) the user model
/// transitions before the agent gets its update.
pub fn run_episode(
    env: &mut Environment,
    agent: &mut dyn Agent,
    id: EpisodeId,
    context: &LogContext,
    record: bool,
) -> Result<EpisodeOutcome, SimError> {
    let seed = id.seed();
    let mut env_rng = rng::stream(seed, Stream::Environment);
    let mut agent_rng = rng::stream(seed, Stream::Agent);
    let episode = id.index;

    env.reset(&mut env_rng);
    agent.begin_episode();
    if agent.needs_document_oracle() {
        agent.provide_document_oracle(env.corpus());
    }

    let mut turns = Vec::new();
    let mut summary = EpisodeSummary::default();
    let mut topics = BTreeSet::new();
    let mut obs = env.observe(None);
    let mut t = 0;
    loop {
        let step = agent
            .step(&obs, &mut agent_rng)
            .map_err(|source| SimError::Agent { episode, turn: t, source })?;
        validate_slate(&step.slate, env.corpus())
            .map_err(|source| SimError::Slate { episode, turn: t, source })?;
        let docs = env.slate_documents(&step.slate);
        let response = env
            .responses
            .respond(env.user_state(), &docs, &mut env_rng)
            .map_err(|source| SimError::Choice { episode, turn: t, source })?;
        let reward = env.reward.reward(&response);
        let next_state = env
            .users
            .transition(env.user_state(), &docs, &response, &mut env_rng);
        env.set_user_state(next_state);
        t += 1;
        let done = env.is_terminal(t);
        let next_obs = env.observe(Some(&response));

        summary.reward += reward;
        summary.clicks += usize::from(response.is_click());
        topics.extend(docs.iter().map(|d| d.topic()));
        agent
            .update(&next_obs, reward, done)
            .map_err(|source| SimError::Agent { episode, turn: t - 1, source })?;
        let seen = std::mem::replace(&mut obs, next_obs);
        if record {
            turns.push(TurnRecord {
                t: t - 1,
                obs: seen,
                slate: step.slate.items,
                response,
                reward,
            });
        }
        if done {
            break;
        }
    }
    summary.turns = t;
    summary.distinct_topics = topics.len();
    let log = record.then(|| EpisodeLog {
        header: EpisodeHeader {
            episode,
            seed,
            config_digest: context.config_digest.clone(),
            env_digest: context.env_digest.clone(),
            agent_digest: context.agent_digest.clone(),
            phase: id.phase,
        },
        turns,
        terminal: true,
    });
    Ok(EpisodeOutcome { summary, log })
}
