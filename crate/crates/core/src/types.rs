//! Domain types shared by every part of the simulator.
//!
//! The types here encode the information-flow structure of a simulated
//! session: the choice and transition models see a full [`UserState`], while
//! agents only ever see an [`Observation`] produced by
//! [`project_observation`] under an [`Observability`] whitelist.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::BanditStats;
use crate::error::{ChoiceError, SlateError};

/// Dense per-corpus document identifier.
pub type DocId = u32;

/// Topic affinity vector.
///
/// Document vectors live in `[0,1]^T`, user interest vectors in `[-1,1]^T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicVector(Vec<f64>);

impl TopicVector {
    pub fn new(entries: Vec<f64>) -> Self {
        Self(entries)
    }

    pub fn zeros(num_topics: usize) -> Self {
        Self(vec![0.0; num_topics])
    }

    /// The unit vector `e_topic`.
    pub fn one_hot(num_topics: usize, topic: usize) -> Self {
        let mut v = vec![0.0; num_topics];
        v[topic] = 1.0;
        Self(v)
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, other: &TopicVector) -> Result<f64, ChoiceError> {
        if self.len() != other.len() {
            return Err(ChoiceError::DimensionMismatch {
                user: self.len(),
                document: other.len(),
            });
        }
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    /// Index of the largest entry; the lowest index wins ties.
    pub fn dominant_topic(&self) -> usize {
        argmax_low(&self.0)
    }

    pub fn is_valid_document(&self) -> bool {
        !self.is_empty() && self.0.iter().all(|v| (0.0..=1.0).contains(v))
    }

    pub fn is_one_hot(&self) -> bool {
        self.0.iter().filter(|&&v| v == 1.0).count() == 1
            && self.0.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn is_valid_user(&self) -> bool {
        !self.is_empty() && self.0.iter().all(|v| (-1.0..=1.0).contains(v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: DocId,
    pub topics: TopicVector,
    /// Consumption time in abstract time units.
    pub length: f64,
    /// Latent inherent quality.
    pub quality: f64,
    /// Quality as exposed to agents, for environments that publish it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable_quality: Option<f64>,
}

impl Document {
    pub fn topic(&self) -> usize {
        self.topics.dominant_topic()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_digest: String,
}

/// Candidate documents available for recommendation during an episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    documents: Vec<Document>,
    pub provenance: Provenance,
}

impl Corpus {
    pub fn new(documents: Vec<Document>, provenance: Provenance) -> Result<Self, SlateError> {
        if documents.is_empty() {
            return Err(SlateError::EmptyCorpus);
        }
        let mut seen = BTreeSet::new();
        for d in &documents {
            if !seen.insert(d.id) {
                return Err(SlateError::DuplicateItem(d.id));
            }
        }
        Ok(Self {
            documents,
            provenance,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: DocId) -> Option<&Document> {
        // ids are dense for sampled corpora
        match self.documents.get(id as usize) {
            Some(d) if d.id == id => Some(d),
            _ => self.documents.iter().find(|d| d.id == id),
        }
    }

    /// Resolves every slate item; the slate must already be validated.
    pub fn resolve(&self, slate: &Slate) -> Result<Vec<Document>, SlateError> {
        slate
            .items
            .iter()
            .map(|&id| self.get(id).cloned().ok_or(SlateError::UnknownDocument(id)))
            .collect()
    }
}

/// Full (latent and observable) state of one simulated user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    pub interests: TopicVector,
    /// Remaining session time; the episode ends once it reaches zero.
    pub budget: f64,
    pub satisfaction: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub observable_features: BTreeMap<String, f64>,
}

impl UserState {
    pub fn is_valid(&self) -> bool {
        self.interests.is_valid_user()
            && self.budget >= 0.0
            && (0.0..=1.0).contains(&self.satisfaction)
    }
}

/// Ordered recommendation shown to the user.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Slate {
    pub items: Vec<DocId>,
}

impl Slate {
    pub fn new(items: Vec<DocId>) -> Self {
        Self { items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Rejects empty slates, duplicates and documents outside the corpus.
pub fn validate_slate(slate: &Slate, corpus: &Corpus) -> Result<(), SlateError> {
    if slate.is_empty() {
        return Err(SlateError::EmptySlate);
    }
    let mut seen = BTreeSet::new();
    for &id in &slate.items {
        if !seen.insert(id) {
            return Err(SlateError::DuplicateItem(id));
        }
        if corpus.get(id).is_none() {
            return Err(SlateError::UnknownDocument(id));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    /// Slate position of the consumed item; `None` is a no-click.
    pub chosen_index: Option<usize>,
    pub engagement: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revealed_quality: Option<f64>,
}

impl Response {
    pub fn no_click() -> Self {
        Self {
            chosen_index: None,
            engagement: 0.0,
            revealed_quality: None,
        }
    }

    pub fn is_click(&self) -> bool {
        self.chosen_index.is_some()
    }
}

/// Per-field observability whitelist.
///
/// `user` may name `interests`, `budget`, `satisfaction` or any key of
/// [`UserState::observable_features`]; `doc` may name `topics`, `length` and
/// `quality` (the published quality, never the latent one).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observability {
    #[serde(default)]
    pub user: BTreeSet<String>,
    #[serde(default = "default_doc_fields")]
    pub doc: BTreeSet<String>,
}

pub const DOC_FIELDS: [&str; 3] = ["topics", "length", "quality"];

fn default_doc_fields() -> BTreeSet<String> {
    ["topics", "length"].iter().map(|s| s.to_string()).collect()
}

impl Default for Observability {
    fn default() -> Self {
        Self {
            user: BTreeSet::new(),
            doc: default_doc_fields(),
        }
    }
}

impl Observability {
    pub fn with_user_fields(mut self, fields: &[&str]) -> Self {
        self.user.extend(fields.iter().map(|s| s.to_string()));
        self
    }

    pub fn with_doc_fields(mut self, fields: &[&str]) -> Self {
        self.doc.extend(fields.iter().map(|s| s.to_string()));
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UserObservation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interests: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub satisfaction: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub features: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocObservation {
    pub id: DocId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topics: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<f64>,
}

impl DocObservation {
    /// Dominant observable topic, if topics are visible.
    pub fn topic(&self) -> Option<usize> {
        self.topics
            .as_ref()
            .map(|t| argmax_low(t))
    }
}

fn argmax_low(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Features injected by agent layers. Never produced by an environment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Augmentations {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_stats: Option<BanditStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<HistoryEntry>>,
}

impl Augmentations {
    pub fn is_empty(&self) -> bool {
        self.cluster_stats.is_none() && self.history.is_none()
    }
}

/// Agent-visible projection of the simulation state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub user_observable: UserObservation,
    pub doc_observables: Vec<DocObservation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_response: Option<Response>,
    #[serde(default, skip_serializing_if = "Augmentations::is_empty")]
    pub augmentations: Augmentations,
}

impl Observation {
    pub fn doc(&self, id: DocId) -> Option<&DocObservation> {
        match self.doc_observables.get(id as usize) {
            Some(d) if d.id == id => Some(d),
            _ => self.doc_observables.iter().find(|d| d.id == id),
        }
    }

    /// Candidate ids in ascending order.
    pub fn candidate_ids(&self) -> Vec<DocId> {
        let mut ids: Vec<DocId> = self.doc_observables.iter().map(|d| d.id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn without_augmentations(&self) -> Observation {
        Observation {
            user_observable: self.user_observable.clone(),
            doc_observables: self.doc_observables.clone(),
            last_response: self.last_response.clone(),
            augmentations: Augmentations::default(),
        }
    }

    /// Scalar feature lookup by flat name.
    ///
    /// Names: `interests/<i>`, `budget`, `satisfaction`, any observable user
    /// feature, `impressions/<t>`, `clicks/<t>`, `ctr/<t>` (from click
    /// statistics), `history/<age>/choice` and `history/<age>/slate_topic/<pos>`
    /// (age 0 is the most recent turn; a no-click choice is -1).
    pub fn feature(&self, name: &str) -> Option<f64> {
        let user = &self.user_observable;
        let mut parts = name.split('/');
        match parts.next()? {
            "interests" => {
                let i: usize = parts.next()?.parse().ok()?;
                user.interests.as_ref()?.get(i).copied()
            }
            "budget" => user.budget,
            "satisfaction" => user.satisfaction,
            "impressions" | "clicks" | "ctr" => {
                let stats = self.augmentations.cluster_stats.as_ref()?;
                let t: usize = parts.next()?.parse().ok()?;
                match name.split('/').next()? {
                    "impressions" => stats.impressions.get(t).map(|&n| n as f64),
                    "clicks" => stats.clicks.get(t).map(|&n| n as f64),
                    _ => stats.ctr(t),
                }
            }
            "history" => {
                let history = self.augmentations.history.as_ref()?;
                let age: usize = parts.next()?.parse().ok()?;
                let entry = history.iter().rev().nth(age)?;
                match parts.next()? {
                    "choice" => Some(entry.response.chosen_index.map_or(-1.0, |i| i as f64)),
                    "slate_topic" => {
                        let pos: usize = parts.next()?.parse().ok()?;
                        let id = *entry.slate.items.get(pos)?;
                        entry.observation.doc(id)?.topic().map(|t| t as f64)
                    }
                    _ => None,
                }
            }
            _ => user.features.get(name).copied(),
        }
    }

    /// Every scalar feature name currently resolvable, in a stable order.
    pub fn feature_names(&self) -> Vec<String> {
        let user = &self.user_observable;
        let mut names = Vec::new();
        if let Some(interests) = &user.interests {
            names.extend((0..interests.len()).map(|i| format!("interests/{i}")));
        }
        if user.budget.is_some() {
            names.push("budget".to_string());
        }
        if user.satisfaction.is_some() {
            names.push("satisfaction".to_string());
        }
        names.extend(user.features.keys().cloned());
        if let Some(stats) = &self.augmentations.cluster_stats {
            for t in 0..stats.num_topics() {
                names.push(format!("impressions/{t}"));
                names.push(format!("clicks/{t}"));
            }
        }
        names
    }
}

/// Projects the full state onto the agent-visible observation.
///
/// Only whitelisted fields are copied. The revealed quality carried by the
/// last response is dropped unless document quality is itself observable.
pub fn project_observation(
    state: &UserState,
    corpus: &Corpus,
    observability: &Observability,
    last_response: Option<&Response>,
) -> Observation {
    let user_field = |f: &str| observability.user.contains(f);
    let doc_field = |f: &str| observability.doc.contains(f);

    let user_observable = UserObservation {
        interests: user_field("interests").then(|| state.interests.entries().to_vec()),
        budget: user_field("budget").then_some(state.budget),
        satisfaction: user_field("satisfaction").then_some(state.satisfaction),
        features: state
            .observable_features
            .iter()
            .filter(|(k, _)| observability.user.contains(k.as_str()))
            .map(|(k, v)| (k.clone(), *v))
            .collect(),
    };

    let doc_observables = corpus
        .documents()
        .iter()
        .map(|d| DocObservation {
            id: d.id,
            topics: doc_field("topics").then(|| d.topics.entries().to_vec()),
            length: doc_field("length").then_some(d.length),
            quality: if doc_field("quality") {
                d.observable_quality
            } else {
                None
            },
        })
        .collect();

    let last_response = last_response.map(|r| Response {
        chosen_index: r.chosen_index,
        engagement: r.engagement,
        revealed_quality: if doc_field("quality") {
            r.revealed_quality
        } else {
            None
        },
    });

    Observation {
        user_observable,
        doc_observables,
        last_response,
        augmentations: Augmentations::default(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    /// Shared so copying the history does not copy every document.
    pub observation: Arc<Observation>,
    pub slate: Slate,
    pub response: Response,
}

/// Bounded FIFO of past turns, most recent last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    bound: usize,
    entries: VecDeque<HistoryEntry>,
}

impl History {
    pub fn new(bound: usize) -> Self {
        Self {
            bound,
            entries: VecDeque::with_capacity(bound),
        }
    }

    pub fn push(&mut self, entry: HistoryEntry) {
        if self.bound == 0 {
            return;
        }
        if self.entries.len() == self.bound {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = &HistoryEntry> {
        self.entries.iter()
    }

    pub fn to_vec(&self) -> Vec<HistoryEntry> {
        self.entries.iter().cloned().collect()
    }
}
