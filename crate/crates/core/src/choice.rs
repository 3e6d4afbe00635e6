//! User choice models over a slate plus a null (no-click) outcome.
//!
//! Every distribution returned here has `k + 1` entries: one per slate
//! position followed by the null outcome.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ChoiceError, ConfigError};
use crate::types::{Document, UserState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceKind {
    /// `P(i) ∝ f(score_i)`.
    Conditional,
    /// Multinomial logit, `P(i) ∝ exp(score_i)`.
    Logit,
    /// Top-down scan with geometrically decaying attention.
    Cascade,
}

/// Scalar transformation applied to scores by the conditional model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScoreFn {
    Identity,
    Exp,
    Affine { scale: f64, offset: f64 },
}

impl ScoreFn {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            ScoreFn::Identity => x,
            ScoreFn::Exp => x.exp(),
            ScoreFn::Affine { scale, offset } => scale * x + offset,
        }
    }

    pub fn is_strictly_increasing(&self) -> bool {
        match *self {
            ScoreFn::Identity | ScoreFn::Exp => true,
            ScoreFn::Affine { scale, .. } => scale > 0.0,
        }
    }
}

/// Maps a raw score into an examination-conditional click probability.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Squash {
    Logistic,
    Clip,
}

impl Squash {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Squash::Logistic => 1.0 / (1.0 + (-x).exp()),
            Squash::Clip => x.clamp(0.0, 1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoiceConfig {
    pub kind: ChoiceKind,
    #[serde(default = "default_score_fn")]
    pub score_fn: ScoreFn,
    /// Score of the null item; `None` removes the no-click outcome.
    #[serde(default = "default_null_score")]
    pub null_score: Option<f64>,
    /// Attention decay per position for the cascade model.
    #[serde(default = "default_attention")]
    pub cascade_attention: f64,
    #[serde(default = "default_squash")]
    pub squash: Squash,
}

fn default_score_fn() -> ScoreFn {
    ScoreFn::Exp
}

fn default_null_score() -> Option<f64> {
    Some(0.0)
}

fn default_attention() -> f64 {
    1.0
}

fn default_squash() -> Squash {
    Squash::Logistic
}

impl ChoiceConfig {
    pub fn new(kind: ChoiceKind) -> Self {
        Self {
            kind,
            score_fn: default_score_fn(),
            null_score: default_null_score(),
            cascade_attention: default_attention(),
            squash: default_squash(),
        }
    }

    pub fn conditional(score_fn: ScoreFn) -> Self {
        Self {
            score_fn,
            ..Self::new(ChoiceKind::Conditional)
        }
    }

    pub fn logit() -> Self {
        Self::new(ChoiceKind::Logit)
    }

    pub fn cascade(attention: f64, squash: Squash) -> Self {
        Self {
            cascade_attention: attention,
            squash,
            ..Self::new(ChoiceKind::Cascade)
        }
    }

    pub fn with_null(mut self, null_score: Option<f64>) -> Self {
        self.null_score = null_score;
        self
    }

    pub fn validate(&self, path: &str) -> Result<(), ConfigError> {
        let beta = self.cascade_attention;
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(ConfigError::new(
                format!("{path}.cascade_attention"),
                format!("must lie in (0, 1], got {beta}"),
            ));
        }
        if let Some(n) = self.null_score {
            if !n.is_finite() {
                return Err(ConfigError::new(format!("{path}.null_score"), "must be finite"));
            }
        }
        if let ScoreFn::Affine { scale, offset } = self.score_fn {
            if !scale.is_finite() || !offset.is_finite() {
                return Err(ConfigError::new(format!("{path}.score_fn"), "must be finite"));
            }
        }
        Ok(())
    }
}

/// Topic affinity `I(u, d)`, the dot product of interest and topic vectors.
pub fn score(user: &UserState, doc: &Document) -> Result<f64, ChoiceError> {
    user.interests.dot(&doc.topics)
}

/// Distribution over the `k` slate positions followed by the null outcome.
pub fn choice_distribution(scores: &[f64], cfg: &ChoiceConfig) -> Result<Vec<f64>, ChoiceError> {
    match cfg.kind {
        ChoiceKind::Logit => Ok(softmax_with_null(scores, cfg.null_score)),
        ChoiceKind::Conditional => match cfg.score_fn {
            // exp(x) overflows long before the ratio does
            ScoreFn::Exp => Ok(softmax_with_null(scores, cfg.null_score)),
            f => conditional(scores, cfg.null_score, f),
        },
        ChoiceKind::Cascade => Ok(cascade(scores, cfg.cascade_attention, cfg.squash)),
    }
}

fn softmax_with_null(scores: &[f64], null_score: Option<f64>) -> Vec<f64> {
    let max = scores
        .iter()
        .copied()
        .chain(null_score)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    out.push(null_score.map_or(0.0, |n| (n - max).exp()));
    normalize(&mut out);
    out
}

fn conditional(
    scores: &[f64],
    null_score: Option<f64>,
    f: ScoreFn,
) -> Result<Vec<f64>, ChoiceError> {
    let mut out = Vec::with_capacity(scores.len() + 1);
    for &s in scores {
        let w = f.apply(s);
        if !(w.is_finite() && w >= 0.0) {
            return Err(ChoiceError::InvalidScore(w));
        }
        out.push(w);
    }
    let null_w = match null_score {
        Some(n) => {
            let w = f.apply(n);
            if !(w.is_finite() && w >= 0.0) {
                return Err(ChoiceError::InvalidScore(w));
            }
            w
        }
        None => 0.0,
    };
    out.push(null_w);
    let total: f64 = out.iter().sum();
    if total == 0.0 {
        // nothing attracts the user
        let k = scores.len();
        out.iter_mut().for_each(|p| *p = 0.0);
        if null_score.is_some() || k == 0 {
            out[k] = 1.0;
        } else {
            out[..k].iter_mut().for_each(|p| *p = 1.0 / k as f64);
        }
        return Ok(out);
    }
    normalize(&mut out);
    Ok(out)
}

fn cascade(scores: &[f64], attention: f64, squash: Squash) -> Vec<f64> {
    let mut out = Vec::with_capacity(scores.len() + 1);
    let mut reach = 1.0;
    let mut examine = 1.0;
    for &s in scores {
        let p = examine * squash.apply(s);
        out.push(reach * p);
        reach *= 1.0 - p;
        examine *= attention;
    }
    out.push(reach);
    out
}

fn normalize(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|p| *p /= total);
}

/// Draws a slate position, or `None` for the null outcome (the last entry).
pub fn sample_choice<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> Option<usize> {
    let k = dist.len().saturating_sub(1);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return (i < k).then_some(i);
        }
    }
    // rounding left u above the running sum; fall back to the last non-zero entry
    let last = dist.iter().rposition(|&p| p > 0.0)?;
    (last < k).then_some(last)
}
