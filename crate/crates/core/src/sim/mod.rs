//! The simulation loop: episodes, training iterations, evaluation,
//! checkpoints, episode logs and metrics.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::digest::json_digest;
use crate::envs::Environment;
use crate::error::{ConfigError, SimError};
use crate::rng::Phase;

mod checkpoint;
mod episode;
mod metrics;

pub use checkpoint::{Checkpoint, Progress, CHECKPOINT_VERSION};
pub use episode::{
    run_episode, EpisodeHeader, EpisodeId, EpisodeLog, EpisodeOutcome, EpisodeSummary, LogContext,
    TerminalRecord, TurnRecord,
};
pub use metrics::{parse_metrics_csv, write_metrics_csv, MetricsRow, METRICS_HEADER};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub num_train_iterations: u64,
    /// An iteration runs episodes until at least this many turns have passed.
    pub turns_per_iteration: usize,
    pub num_eval_episodes: u64,
    pub parallel_eval_workers: usize,
    /// Write JSONL episode logs for training episodes.
    pub log_train_episodes: bool,
    /// Write JSONL episode logs for evaluation episodes.
    pub log_eval_episodes: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_train_iterations: 10,
            turns_per_iteration: 1000,
            num_eval_episodes: 20,
            parallel_eval_workers: 1,
            log_train_episodes: true,
            log_eval_episodes: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, path: &str) -> Result<(), ConfigError> {
        if self.turns_per_iteration < 1 {
            return Err(ConfigError::new(format!("{path}.turns_per_iteration"), "must be >= 1"));
        }
        if self.parallel_eval_workers < 1 {
            return Err(ConfigError::new(format!("{path}.parallel_eval_workers"), "must be >= 1"));
        }
        Ok(())
    }
}

/// A training run: one environment, one learning agent.
#[derive(Debug)]
pub struct Simulation {
    env: Environment,
    agent: Box<dyn Agent>,
    settings: SimConfig,
    context: LogContext,
    progress: Progress,
}

impl Simulation {
    pub fn new(env: Environment, agent: Box<dyn Agent>, settings: SimConfig, context: LogContext) -> Self {
        Self {
            env,
            agent,
            settings,
            context,
            progress: Progress::default(),
        }
    }

    pub fn agent(&self) -> &dyn Agent {
        self.agent.as_ref()
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn settings(&self) -> &SimConfig {
        &self.settings
    }

    pub fn context(&self) -> &LogContext {
        &self.context
    }

    pub fn progress(&self) -> Progress {
        self.progress
    }

    /// Runs episodes until `turns_per_iteration` turns have elapsed, finishing
    /// the last episode, and returns the iteration's metrics.
    pub fn run_iteration(&mut self, mut log: Option<&mut dyn Write>) -> Result<MetricsRow, SimError> {
        self.agent.set_training(true);
        let mut summaries = Vec::new();
        let mut turns = 0;
        while turns < self.settings.turns_per_iteration {
            let id = EpisodeId {
                master_seed: self.settings.seed,
                phase: Phase::Train,
                index: self.progress.episodes,
            };
            let outcome = run_episode(
                &mut self.env,
                self.agent.as_mut(),
                id,
                &self.context,
                log.is_some(),
            )?;
            self.progress.episodes += 1;
            turns += outcome.summary.turns;
            if let (Some(w), Some(l)) = (log.as_deref_mut(), &outcome.log) {
                l.write_jsonl(w)?;
            }
            summaries.push(outcome.summary);
        }
        let row = MetricsRow::aggregate(self.progress.iteration, &summaries);
        self.progress.iteration += 1;
        Ok(row)
    }

    /// Runs the remaining training iterations.
    pub fn train(&mut self, mut log: Option<&mut dyn Write>) -> Result<Vec<MetricsRow>, SimError> {
        let mut rows = Vec::new();
        while self.progress.iteration < self.settings.num_train_iterations {
            rows.push(self.run_iteration(log.as_mut().map(|w| &mut **w as &mut dyn Write))?);
        }
        Ok(rows)
    }

    /// Evaluates a frozen copy of the agent; the training agent is untouched.
    pub fn evaluate(&self, env: &Environment, log: Option<&mut dyn Write>) -> Result<MetricsRow, SimError> {
        evaluate(
            env,
            self.agent.as_ref(),
            &EvalSettings {
                master_seed: self.settings.seed,
                episodes: self.settings.num_eval_episodes,
                workers: self.settings.parallel_eval_workers,
                iteration: self.progress.iteration,
            },
            &self.context,
            log,
        )
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            agent_kind: self.agent.kind(),
            config_digest: self.context.config_digest.clone(),
            progress: self.progress,
            state: self.agent.save_state(),
        }
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<(), SimError> {
        Ok(self.checkpoint().save(path)?)
    }

    pub fn restore(&mut self, ckpt: &Checkpoint) -> Result<(), SimError> {
        self.agent.load_state(&ckpt.state)?;
        self.progress = ckpt.progress;
        Ok(())
    }

    pub fn restore_from(&mut self, path: &Path) -> Result<(), SimError> {
        let ckpt = Checkpoint::load(path, &self.agent.kind())?;
        self.restore(&ckpt)
    }

    /// Digest of the agent's learned parameters.
    pub fn agent_digest(&self) -> String {
        json_digest(&self.agent.save_state())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalSettings {
    pub master_seed: u64,
    pub episodes: u64,
    pub workers: usize,
    /// Recorded in the metrics row.
    pub iteration: u64,
}

/// Runs evaluation episodes on frozen clones of `agent`.
///
/// Every episode starts from its own clone and its own seed, and results are
/// reduced in episode order, so the outcome does not depend on `workers`.
pub fn evaluate(
    env: &Environment,
    agent: &dyn Agent,
    settings: &EvalSettings,
    context: &LogContext,
    log: Option<&mut dyn Write>,
) -> Result<MetricsRow, SimError> {
    let record = log.is_some();
    let mut frozen = agent.box_clone();
    frozen.set_training(false);
    let run = |env: &mut Environment, index: u64| {
        let mut a = frozen.box_clone();
        let id = EpisodeId {
            master_seed: settings.master_seed,
            phase: Phase::Eval,
            index,
        };
        run_episode(env, a.as_mut(), id, context, record)
    };

    let n = settings.episodes as usize;
    let workers = settings.workers.clamp(1, n.max(1));
    let outcomes: Vec<Result<EpisodeOutcome, SimError>> = if workers == 1 {
        let mut env = env.clone();
        (0..n as u64).map(|i| run(&mut env, i)).collect()
    } else {
        let mut slots: Vec<Option<Result<EpisodeOutcome, SimError>>> = (0..n).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let mut env = env.clone();
                    let run = &run;
                    scope.spawn(move || {
                        (w..n)
                            .step_by(workers)
                            .map(|i| (i, run(&mut env, i as u64)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("evaluation worker panicked") {
                    slots[i] = Some(r);
                }
            }
        });
        slots.into_iter().map(|s| s.expect("every episode ran")).collect()
    };

    let mut summaries = Vec::with_capacity(n);
    let mut log = log;
    for outcome in outcomes {
        let outcome = outcome?;
        if let (Some(w), Some(l)) = (log.as_deref_mut(), &outcome.log) {
            l.write_jsonl(w)?;
        }
        summaries.push(outcome.summary);
    }
    Ok(MetricsRow::aggregate(settings.iteration, &summaries))
}
