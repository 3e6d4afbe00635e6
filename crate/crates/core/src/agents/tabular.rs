//! Tabular Q-learning over enumerated slates.
//!
//! Observations are discretized into a state key; every candidate slate is
//! enumerated and mapped to an action key built from the observable features
//! of its documents. [`SlateMode::Combinations`] treats a slate as an
//! unordered set of documents, [`SlateMode::Permutations`] treats each ordered
//! slate as one atomic action.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{decode_state, Agent, AgentStep};
use crate::error::{AgentError, CheckpointError};
use crate::rng::SimRng;
use crate::types::{DocObservation, Observation, Slate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearningRate {
    /// `1 / n` for the n-th visit of a state-action pair.
    InverseCount,
    Constant { rate: f64 },
    /// `1 / n^exponent`.
    Polynomial { exponent: f64 },
}

impl LearningRate {
    pub fn rate(&self, visits: u64) -> f64 {
        let n = visits.max(1) as f64;
        match *self {
            LearningRate::InverseCount => 1.0 / n,
            LearningRate::Constant { rate } => rate,
            LearningRate::Polynomial { exponent } => n.powf(-exponent),
        }
    }
}

/// Uniform bins over `[low, high]`; values outside are clamped to the edge bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureBins {
    pub name: String,
    pub low: f64,
    pub high: f64,
    pub bins: usize,
}

impl FeatureBins {
    pub fn new(name: &str, low: f64, high: f64, bins: usize) -> Self {
        Self {
            name: name.to_string(),
            low,
            high,
            bins,
        }
    }

    /// Missing features map to -1.
    pub fn bin(&self, value: Option<f64>) -> i32 {
        match value {
            None => -1,
            Some(v) => uniform_bin(v, self.low, self.high, self.bins),
        }
    }
}

fn uniform_bin(v: f64, low: f64, high: f64, bins: usize) -> i32 {
    if bins <= 1 || high <= low {
        return 0;
    }
    let b = ((v - low) / (high - low) * bins as f64).floor();
    b.clamp(0.0, (bins - 1) as f64) as i32
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discretizer {
    features: Option<Vec<FeatureBins>>,
    default_bins: usize,
}

impl Discretizer {
    /// `None` discretizes every resolvable scalar feature into `default_bins`
    /// uniform bins: interests over `[-1, 1]`, everything else over `[0, 1]`.
    pub fn new(features: Option<Vec<FeatureBins>>, default_bins: usize) -> Self {
        Self {
            features,
            default_bins,
        }
    }

    pub fn key(&self, obs: &Observation) -> Vec<i32> {
        match &self.features {
            Some(fs) => fs.iter().map(|f| f.bin(obs.feature(&f.name))).collect(),
            None => obs
                .feature_names()
                .iter()
                .map(|name| {
                    let (lo, hi) = if name.starts_with("interests/") {
                        (-1.0, 1.0)
                    } else {
                        (0.0, 1.0)
                    };
                    obs.feature(name)
                        .map_or(-1, |v| uniform_bin(v, lo, hi, self.default_bins))
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlateMode {
    Combinations,
    Permutations,
}

/// `C(m,k)` or `C(m,k)·k!`, saturating.
pub fn count_slates(m: usize, k: usize, mode: SlateMode) -> u128 {
    if k > m {
        return 0;
    }
    let mut count: u128 = 1;
    for i in 0..k as u128 {
        // falling factorial m·(m-1)·…·(m-k+1)
        count = count.saturating_mul(m as u128 - i);
    }
    if mode == SlateMode::Combinations {
        for i in 1..=k as u128 {
            count /= i;
        }
    }
    count
}

/// Visits every slate of `k` positions out of `m` in lexicographic order.
pub fn for_each_slate(m: usize, k: usize, mode: SlateMode, f: &mut dyn FnMut(&[usize])) {
    if k > m {
        return;
    }
    match mode {
        SlateMode::Combinations => {
            let mut idx: Vec<usize> = (0..k).collect();
            loop {
                f(&idx);
                // rightmost position that can still advance
                let Some(i) = (0..k).rev().find(|&i| idx[i] < m - k + i) else {
                    return;
                };
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
            }
        }
        SlateMode::Permutations => {
            let mut used = vec![false; m];
            let mut cur = Vec::with_capacity(k);
            permute(m, k, &mut used, &mut cur, f);
        }
    }
}

fn permute(m: usize, k: usize, used: &mut [bool], cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if cur.len() == k {
        f(cur);
        return;
    }
    for i in 0..m {
        if !used[i] {
            used[i] = true;
            cur.push(i);
            permute(m, k, used, cur, f);
            cur.pop();
            used[i] = false;
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QEntry {
    pub q: f64,
    pub visits: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct QRow {
    state: Vec<i32>,
    action: Vec<u32>,
    q: f64,
    visits: u64,
}

/// Q-values keyed by discretized state, then action.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<QRow>", into = "Vec<QRow>")]
pub struct QTable {
    rows: BTreeMap<Vec<i32>, BTreeMap<Vec<u32>, QEntry>>,
}

impl From<Vec<QRow>> for QTable {
    fn from(rows: Vec<QRow>) -> Self {
        let mut t = QTable::default();
        for r in rows {
            t.rows.entry(r.state).or_default().insert(
                r.action,
                QEntry {
                    q: r.q,
                    visits: r.visits,
                },
            );
        }
        t
    }
}

impl From<QTable> for Vec<QRow> {
    fn from(t: QTable) -> Self {
        t.rows
            .into_iter()
            .flat_map(|(state, actions)| {
                actions.into_iter().map(move |(action, e)| QRow {
                    state: state.clone(),
                    action,
                    q: e.q,
                    visits: e.visits,
                })
            })
            .collect()
    }
}

impl QTable {
    /// Unvisited pairs are worth 0.
    pub fn get(&self, state: &[i32], action: &[u32]) -> f64 {
        self.entry(state, action).map_or(0.0, |e| e.q)
    }

    pub fn entry(&self, state: &[i32], action: &[u32]) -> Option<&QEntry> {
        self.rows.get(state)?.get(action)
    }

    pub fn entry_mut(&mut self, state: &[i32], action: &[u32]) -> &mut QEntry {
        self.rows
            .entry(state.to_vec())
            .or_default()
            .entry(action.to_vec())
            .or_default()
    }

    pub fn row(&self, state: &[i32]) -> Option<&BTreeMap<Vec<u32>, QEntry>> {
        self.rows.get(state)
    }

    pub fn len(&self) -> usize {
        self.rows.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QConfig {
    pub discount: f64,
    pub learning_rate: LearningRate,
    /// Exploration rate while training.
    pub epsilon: f64,
    /// Exploration rate while evaluating.
    pub eval_epsilon: f64,
    /// Explicit observation features; `None` discretizes everything.
    pub features: Option<Vec<FeatureBins>>,
    pub default_bins: usize,
    /// Bins for published document quality in action keys.
    pub quality_bins: usize,
    pub action_cap: u64,
}

impl Default for QConfig {
    fn default() -> Self {
        Self {
            discount: 0.9,
            learning_rate: LearningRate::InverseCount,
            epsilon: 0.1,
            eval_epsilon: 0.0,
            features: None,
            default_bins: 5,
            quality_bins: 5,
            action_cap: 100_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TabularQAgent {
    cfg: QConfig,
    mode: SlateMode,
    slate_size: usize,
    discretizer: Discretizer,
    table: QTable,
    training: bool,
    pending: Option<(Vec<i32>, Vec<u32>)>,
}

#[derive(Serialize, Deserialize)]
struct SavedQ {
    table: QTable,
}

/// Candidates in id order with their action-key component.
struct Candidates {
    ids: Vec<u32>,
    keys: Vec<u32>,
}

impl TabularQAgent {
    pub fn new(cfg: QConfig, mode: SlateMode, slate_size: usize) -> Self {
        let discretizer = Discretizer::new(cfg.features.clone(), cfg.default_bins);
        Self {
            cfg,
            mode,
            slate_size,
            discretizer,
            table: QTable::default(),
            training: true,
            pending: None,
        }
    }

    pub fn tabular(cfg: QConfig, slate_size: usize) -> Self {
        Self::new(cfg, SlateMode::Combinations, slate_size)
    }

    pub fn full_slate(cfg: QConfig, slate_size: usize) -> Self {
        Self::new(cfg, SlateMode::Permutations, slate_size)
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    pub fn state_key(&self, obs: &Observation) -> Vec<i32> {
        self.discretizer.key(obs)
    }

    fn doc_key(&self, d: &DocObservation) -> u32 {
        let base = match d.topic() {
            Some(t) => t as u32,
            None => d.id,
        };
        match d.quality {
            Some(q) if self.cfg.quality_bins > 1 => {
                let bins = self.cfg.quality_bins as u32;
                base * bins + uniform_bin(q, 0.0, 1.0, self.cfg.quality_bins) as u32
            }
            _ => base,
        }
    }

    fn candidates(&self, obs: &Observation) -> Result<Candidates, AgentError> {
        let mut docs: Vec<&DocObservation> = obs.doc_observables.iter().collect();
        docs.sort_by_key(|d| d.id);
        if docs.len() < self.slate_size {
            return Err(AgentError::CorpusTooSmall {
                needed: self.slate_size,
                available: docs.len(),
            });
        }
        let count = count_slates(docs.len(), self.slate_size, self.mode);
        if count > self.cfg.action_cap as u128 {
            return Err(AgentError::ActionSpaceOverflow {
                count,
                cap: self.cfg.action_cap,
            });
        }
        Ok(Candidates {
            ids: docs.iter().map(|d| d.id).collect(),
            keys: docs.iter().map(|d| self.doc_key(d)).collect(),
        })
    }

    fn action_key(&self, positions: &[usize], keys: &[u32], buf: &mut Vec<u32>) {
        buf.clear();
        buf.extend(positions.iter().map(|&p| keys[p]));
        if self.mode == SlateMode::Combinations {
            buf.sort_unstable();
        }
    }

    /// Greedy slate positions and their value, first maximum in enumeration order.
    fn best(&self, state: &[i32], cands: &Candidates) -> (Vec<usize>, f64) {
        let row = self.table.row(state);
        let mut best: Option<(Vec<usize>, f64)> = None;
        let mut buf = Vec::with_capacity(self.slate_size);
        for_each_slate(cands.ids.len(), self.slate_size, self.mode, &mut |pos| {
            self.action_key(pos, &cands.keys, &mut buf);
            let q = row
                .and_then(|r| r.get(buf.as_slice()))
                .map_or(0.0, |e| e.q);
            if best.as_ref().is_none_or(|(_, b)| q > *b) {
                best = Some((pos.to_vec(), q));
            }
        });
        best.expect("at least one slate")
    }

    fn nth_slate(&self, n: u128, cands: &Candidates) -> Vec<usize> {
        let mut i = 0u128;
        let mut out = Vec::new();
        for_each_slate(cands.ids.len(), self.slate_size, self.mode, &mut |pos| {
            if i == n {
                out = pos.to_vec();
            }
            i += 1;
        });
        out
    }

    /// `max_a Q(key(obs), a)` over the slates available in `obs`.
    pub fn state_value(&self, obs: &Observation) -> Result<f64, AgentError> {
        let cands = self.candidates(obs)?;
        Ok(self.best(&self.discretizer.key(obs), &cands).1)
    }
}

impl Agent for TabularQAgent {
    fn kind(&self) -> String {
        match self.mode {
            SlateMode::Combinations => "tabular_q".into(),
            SlateMode::Permutations => "full_slate_q".into(),
        }
    }

    fn begin_episode(&mut self) {
        self.pending = None;
    }

    fn step(&mut self, obs: &Observation, rng: &mut SimRng) -> Result<AgentStep, AgentError> {
        let cands = self.candidates(obs)?;
        let state = self.discretizer.key(obs);
        let epsilon = if self.training {
            self.cfg.epsilon
        } else {
            self.cfg.eval_epsilon
        };
        let explore = epsilon > 0.0 && rng.random::<f64>() < epsilon;
        let (positions, q) = if explore {
            let count = count_slates(cands.ids.len(), self.slate_size, self.mode);
            let n = rng.random_range(0..count as u64) as u128;
            let pos = self.nth_slate(n, &cands);
            let mut key = Vec::new();
            self.action_key(&pos, &cands.keys, &mut key);
            let q = self.table.get(&state, &key);
            (pos, q)
        } else {
            self.best(&state, &cands)
        };
        let mut action = Vec::new();
        self.action_key(&positions, &cands.keys, &mut action);
        self.pending = Some((state, action));

        let mut step = AgentStep::new(Slate::new(positions.iter().map(|&p| cands.ids[p]).collect()));
        step.diagnostics.insert("q".into(), q);
        step.diagnostics.insert("explore".into(), f64::from(u8::from(explore)));
        Ok(step)
    }

    fn update(&mut self, next_obs: &Observation, reward: f64, done: bool) -> Result<(), AgentError> {
        let Some((state, action)) = self.pending.take() else {
            return Ok(());
        };
        if !self.training {
            return Ok(());
        }
        let bootstrap = if done {
            0.0
        } else {
            self.state_value(next_obs)?
        };
        let target = reward + self.cfg.discount * bootstrap;
        let lr = self.cfg.learning_rate.clone();
        let entry = self.table.entry_mut(&state, &action);
        entry.visits += 1;
        entry.q += lr.rate(entry.visits) * (target - entry.q);
        Ok(())
    }

    fn set_training(&mut self, training: bool) {
        self.training = training;
    }

    fn save_state(&self) -> serde_json::Value {
        serde_json::to_value(SavedQ {
            table: self.table.clone(),
        })
        .expect("serializable table")
    }

    fn load_state(&mut self, state: &serde_json::Value) -> Result<(), CheckpointError> {
        let saved: SavedQ = decode_state(state)?;
        self.table = saved.table;
        Ok(())
    }

    fn box_clone(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }
}
