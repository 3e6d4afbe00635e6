//! Validation of JSONL episode logs.

use serde::Serialize;
use serde_json::Value;

use crate::rng::Phase;
use crate::sim::{EpisodeHeader, LogContext, TerminalRecord, TurnRecord};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchemaViolation {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeReplay {
    pub episode: u64,
    pub seed: u64,
    pub phase: Phase,
    pub turns: usize,
    pub cumulative_reward: f64,
    pub clicks: usize,
    pub complete: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ReplayReport {
    pub episodes: Vec<EpisodeReplay>,
    pub violations: Vec<SchemaViolation>,
    /// Lines whose header digests differ from the expected ones.
    pub digest_mismatches: Vec<usize>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.digest_mismatches.is_empty()
    }
}

enum Line {
    Header(EpisodeHeader),
    Turn(TurnRecord),
    Terminal(TerminalRecord),
}

fn classify(value: Value) -> Result<Line, String> {
    let obj = value.as_object().ok_or("line is not a JSON object")?;
    let parsed = if obj.contains_key("terminal") {
        serde_json::from_value(value).map(Line::Terminal)
    } else if obj.contains_key("episode") {
        serde_json::from_value(value).map(Line::Header)
    } else if obj.contains_key("t") {
        serde_json::from_value(value).map(Line::Turn)
    } else {
        return Err("not a header, turn or terminal line".into());
    };
    parsed.map_err(|e| e.to_string())
}

/// Re-validates every line, recomputes per-episode cumulative reward and,
/// given `expected`, flags headers with different digests.
pub fn replay(text: &str, expected: Option<&LogContext>) -> ReplayReport {
    let mut report = ReplayReport::default();
    let mut current: Option<EpisodeReplay> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut violation = |message: String| {
            report.violations.push(SchemaViolation { line, message });
        };
        let parsed = serde_json::from_str::<Value>(raw)
            .map_err(|e| e.to_string())
            .and_then(classify);
        match parsed {
            Err(e) => {
                // a malformed turn still occupies its slot in the episode
                if raw.contains("\"t\"") && !raw.contains("\"terminal\"") {
                    if let Some(ep) = current.as_mut() {
                        ep.turns += 1;
                    }
                }
                violation(e)
            }
            Ok(Line::Header(h)) => {
                if let Some(open) = current.take() {
                    violation(format!("episode {} has no terminal line", open.episode));
                    report.episodes.push(open);
                }
                if let Some(ctx) = expected {
                    if h.config_digest != ctx.config_digest
                        || h.env_digest != ctx.env_digest
                        || h.agent_digest != ctx.agent_digest
                    {
                        report.digest_mismatches.push(line);
                    }
                }
                current = Some(EpisodeReplay {
                    episode: h.episode,
                    seed: h.seed,
                    phase: h.phase,
                    turns: 0,
                    cumulative_reward: 0.0,
                    clicks: 0,
                    complete: false,
                });
            }
            Ok(Line::Turn(t)) => match current.as_mut() {
                None => violation("turn line outside an episode".into()),
                Some(ep) => {
                    if t.t != ep.turns {
                        violation(format!("expected turn {}, found {}", ep.turns, t.t));
                    }
                    if let Some(c) = t.response.chosen_index {
                        if c >= t.slate.len() {
                            violation(format!("chosen index {c} outside a slate of {}", t.slate.len()));
                        }
                    }
                    ep.turns += 1;
                    ep.cumulative_reward += t.reward;
                    ep.clicks += usize::from(t.response.is_click());
                }
            },
            Ok(Line::Terminal(term)) => match current.take() {
                None => violation("terminal line outside an episode".into()),
                Some(mut ep) => {
                    if term.turns != ep.turns {
                        violation(format!("terminal line claims {} turns, episode has {}", term.turns, ep.turns));
                    }
                    if ep.turns == 0 {
                        violation("episode has no turns".into());
                    }
                    ep.complete = term.terminal;
                    report.episodes.push(ep);
                }
            },
        }
    }
    if let Some(open) = current {
        report.violations.push(SchemaViolation {
            line: text.lines().count(),
            message: format!("episode {} has no terminal line", open.episode),
        });
        report.episodes.push(open);
    }
    report
}
