//! Strategy × environment CTR tables with lift over the Random baseline.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BASELINE: &str = "Random";

const STRATEGY_ORDER: [&str; 5] = ["Random", "Greedy", "TabularQ", "FullSlateQ", "UCB1"];
const ENVIRONMENT_ORDER: [&str; 2] = ["Low Topic Affinity", "High Topic Affinity"];

/// Evaluation CTR of one completed run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub strategy: String,
    pub environment: String,
    pub ctr: f64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SummaryError {
    #[error("no {BASELINE} run for environment {0:?}")]
    MissingBaseline(String),
    #[error("no runs to summarize")]
    Empty,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    /// Mean CTR over the runs of this strategy and environment.
    pub ctr: f64,
    pub runs: usize,
    /// Relative lift over the baseline, in percent; absent on the baseline row.
    pub lift_percent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryTable {
    pub environments: Vec<String>,
    pub strategies: Vec<String>,
    /// Indexed `[strategy][environment]`.
    pub cells: Vec<Vec<Option<Cell>>>,
}

fn rank(order: &[&str], name: &str) -> (usize, String) {
    let i = order.iter().position(|o| *o == name).unwrap_or(order.len());
    (i, name.to_string())
}

pub fn summarize(runs: &[RunResult]) -> Result<SummaryTable, SummaryError> {
    if runs.is_empty() {
        return Err(SummaryError::Empty);
    }
    let mut groups: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for r in runs {
        let g = groups
            .entry((r.strategy.clone(), r.environment.clone()))
            .or_default();
        g.0 += r.ctr;
        g.1 += 1;
    }
    let mut environments: Vec<String> = runs.iter().map(|r| r.environment.clone()).collect();
    environments.sort_by_key(|e| rank(&ENVIRONMENT_ORDER, e));
    environments.dedup();
    let mut strategies: Vec<String> = runs.iter().map(|r| r.strategy.clone()).collect();
    strategies.sort_by_key(|s| rank(&STRATEGY_ORDER, s));
    strategies.dedup();

    let mean = |s: &str, e: &str| {
        groups
            .get(&(s.to_string(), e.to_string()))
            .map(|&(sum, n)| (sum / n as f64, n))
    };
    let mut baselines = Vec::new();
    for e in &environments {
        let (b, _) = mean(BASELINE, e).ok_or_else(|| SummaryError::MissingBaseline(e.clone()))?;
        baselines.push(b);
    }
    let cells = strategies
        .iter()
        .map(|s| {
            environments
                .iter()
                .zip(&baselines)
                .map(|(e, &base)| {
                    mean(s, e).map(|(ctr, runs)| Cell {
                        ctr,
                        runs,
                        lift_percent: (s != BASELINE).then(|| lift_percent(ctr, base)),
                    })
                })
                .collect()
        })
        .collect();
    Ok(SummaryTable {
        environments,
        strategies,
        cells,
    })
}

/// `100 · (ctr − baseline) / baseline`.
pub fn lift_percent(ctr: f64, baseline: f64) -> f64 {
    if baseline == 0.0 {
        if ctr == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        100.0 * (ctr - baseline) / baseline
    }
}

impl SummaryTable {
    pub fn cell(&self, strategy: &str, environment: &str) -> Option<&Cell> {
        let s = self.strategies.iter().position(|x| x == strategy)?;
        let e = self.environments.iter().position(|x| x == environment)?;
        self.cells[s][e].as_ref()
    }

    /// Aligned text table: per environment, the environment name and the
    /// average CTR in percent with the lift in parentheses.
    pub fn render_text(&self) -> String {
        let mut header = vec!["Strategy".to_string()];
        for _ in &self.environments {
            header.push("Environment".to_string());
            header.push("Avg. CTR (%)".to_string());
        }
        let mut rows = vec![header];
        for (s, cells) in self.strategies.iter().zip(&self.cells) {
            let mut row = vec![s.clone()];
            for (e, cell) in self.environments.iter().zip(cells) {
                row.push(e.clone());
                row.push(match cell {
                    None => "-".to_string(),
                    Some(c) => match c.lift_percent {
                        None => format!("{:.2}", 100.0 * c.ctr),
                        Some(l) => format!("{:.2} ({:.2}%)", 100.0 * c.ctr, l),
                    },
                });
            }
            rows.push(row);
        }
        let cols = rows[0].len();
        let widths: Vec<usize> = (0..cols)
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in &rows {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .map(|(v, w)| format!("{v:<w$}"))
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }

    /// One line per strategy and environment.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("strategy,environment,ctr,runs,lift_percent\n");
        for (s, cells) in self.strategies.iter().zip(&self.cells) {
            for (e, cell) in self.environments.iter().zip(cells) {
                if let Some(c) = cell {
                    let lift = c.lift_percent.map_or(String::new(), |l| format!("{l}"));
                    let _ = writeln!(out, "{s},{e},{},{},{lift}", c.ctr, c.runs);
                }
            }
        }
        out
    }
}
