//! Embedding algebra: normalization, cosine similarity, score vectors and
//! a deterministic argmax.
//!
//! Embeddings are stored as `f32` (the interchange precision) but every
//! reduction is carried out in `f64` with left-to-right accumulation, so
//! identical inputs always produce bit-identical scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A vector in the joint vision-language space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct Embedding(Vec<f32>);

impl Embedding {
    /// Wraps `values`, rejecting empty vectors and non-finite entries.
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyEmbedding);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Embedding(values))
    }

    /// Builds an embedding from `f64` values, rounding each to `f32`.
    pub fn from_f64(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| v as f32).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f32> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .fold(0.0f64, |acc, &v| acc + f64::from(v) * f64::from(v))
            .sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// Multiplies every component by `factor` (computed in `f64`, stored as `f32`).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|&v| (f64::from(v) * factor) as f32).collect())
    }
}

impl TryFrom<Vec<f32>> for Embedding {
    type Error = Error;

    fn try_from(values: Vec<f32>) -> Result<Self> {
        Embedding::new(values)
    }
}

impl From<Embedding> for Vec<f32> {
    fn from(e: Embedding) -> Self {
        e.0
    }
}

/// One similarity score per category, in vocabulary order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Self {
        ScoreVector(scores)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn argmax(&self) -> Result<usize> {
        argmax_index(&self.0)
    }
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |acc, (&x, &y)| acc + f64::from(x) * f64::from(y))
}

/// Scales `e` to unit Euclidean norm.
pub fn l2_normalize(e: &Embedding) -> Result<Embedding> {
    let norm = e.norm();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    Embedding::new(e.values().iter().map(|&v| (f64::from(v) / norm) as f32).collect())
}

/// `a·b / (‖a‖‖b‖)`, clamped to `[-1, 1]`.
pub fn cosine_sim(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a.values(), b.values()) / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine similarity of `e` against every vocabulary embedding, in order.
pub fn score_against(e: &Embedding, vocab: &[Embedding]) -> Result<ScoreVector> {
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    vocab
        .iter()
        .map(|v| cosine_sim(e, v))
        .collect::<Result<Vec<_>>>()
        .map(ScoreVector)
}

/// Index of the maximum score; the lowest index wins ties.
pub fn argmax_index(scores: &[f64]) -> Result<usize> {
    let (first, rest) = scores.split_first().ok_or(Error::EmptyScores)?;
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut best = (0, *first);
    for (i, &s) in rest.iter().enumerate() {
        if s > best.1 {
            best = (i + 1, s);
        }
    }
    Ok(best.0)
}
