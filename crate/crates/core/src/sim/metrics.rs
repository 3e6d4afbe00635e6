use std::io::Write;

use serde::{Deserialize, Serialize};

use super::episode::EpisodeSummary;

pub const METRICS_HEADER: &str = "iteration,avg_reward,avg_length,ctr,diversity,episodes";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: u64,
    /// Mean cumulative reward per episode.
    pub avg_reward: f64,
    pub avg_length: f64,
    /// Clicks per turn.
    pub ctr: f64,
    /// Mean number of distinct recommended topics per episode.
    pub diversity: f64,
    pub episodes: u64,
}

impl MetricsRow {
    /// Aggregates episodes in the given order, so equal inputs give equal bits.
    pub fn aggregate(iteration: u64, episodes: &[EpisodeSummary]) -> Self {
        let n = episodes.len();
        if n == 0 {
            return Self {
                iteration,
                ..Self::default()
            };
        }
        let reward: f64 = episodes.iter().map(|e| e.reward).sum();
        let turns: usize = episodes.iter().map(|e| e.turns).sum();
        let clicks: usize = episodes.iter().map(|e| e.clicks).sum();
        let topics: usize = episodes.iter().map(|e| e.distinct_topics).sum();
        Self {
            iteration,
            avg_reward: reward / n as f64,
            avg_length: turns as f64 / n as f64,
            ctr: if turns == 0 { 0.0 } else { clicks as f64 / turns as f64 },
            diversity: topics as f64 / n as f64,
            episodes: n as u64,
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.iteration, self.avg_reward, self.avg_length, self.ctr, self.diversity, self.episodes
        )
    }

    pub fn parse_csv_line(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 6 {
            return None;
        }
        Some(Self {
            iteration: f[0].parse().ok()?,
            avg_reward: f[1].parse().ok()?,
            avg_length: f[2].parse().ok()?,
            ctr: f[3].parse().ok()?,
            diversity: f[4].parse().ok()?,
            episodes: f[5].parse().ok()?,
        })
    }
}

pub fn write_metrics_csv(w: &mut dyn Write, rows: &[MetricsRow]) -> std::io::Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}

/// Parses a metrics file written by [`write_metrics_csv`].
pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == METRICS_HEADER => {}
        other => return Err(format!("unexpected metrics header {other:?}")),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| MetricsRow::parse_csv_line(l).ok_or(format!("line {}: malformed row", i + 2)))
        .collect()
}
