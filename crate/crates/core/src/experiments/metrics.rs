use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::veccore::cosine_sim;

/// Binary confusion counts indexed `[gold][predicted]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub counts: [[u64; 2]; 2],
}

impl Confusion {
    pub fn from_labels(preds: &[u8], golds: &[u8]) -> Result<Self> {
        if preds.len() != golds.len() {
            return Err(Error::LengthMismatch {
                left: preds.len(),
                right: golds.len(),
            });
        }
        if preds.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut counts = [[0u64; 2]; 2];
        for (&p, &g) in preds.iter().zip(golds) {
            if p > 1 || g > 1 {
                return Err(Error::Malformed(format!("label out of range: pred {p}, gold {g}")));
            }
            counts[g as usize][p as usize] += 1;
        }
        Ok(Self { counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// F1 of class `c` as a fraction; 0 when the class is neither
    /// predicted nor present.
    pub fn f1(&self, c: usize) -> f64 {
        let tp = self.counts[c][c];
        let fp = self.counts[1 - c][c];
        let fn_ = self.counts[c][1 - c];
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    }

    pub fn recall(&self, c: usize) -> f64 {
        let support = self.counts[c][0] + self.counts[c][1];
        if support == 0 {
            0.0
        } else {
            self.counts[c][c] as f64 / support as f64
        }
    }

    pub fn accuracy(&self) -> f64 {
        (self.counts[0][0] + self.counts[1][1]) as f64 / self.total() as f64
    }
}

/// Scores in percent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub macro_f1: f64,
    pub accuracy: f64,
    pub per_class_f1: [f64; 2],
}

impl Metrics {
    pub fn compute(preds: &[u8], golds: &[u8]) -> Result<Self> {
        let c = Confusion::from_labels(preds, golds)?;
        let per_class_f1 = [100.0 * c.f1(0), 100.0 * c.f1(1)];
        Ok(Self {
            macro_f1: (per_class_f1[0] + per_class_f1[1]) / 2.0,
            accuracy: 100.0 * c.accuracy(),
            per_class_f1,
        })
    }
}

pub fn macro_f1(preds: &[u8], golds: &[u8]) -> Result<f64> {
    Ok(Metrics::compute(preds, golds)?.macro_f1)
}

pub fn accuracy(preds: &[u8], golds: &[u8]) -> Result<f64> {
    Ok(Metrics::compute(preds, golds)?.accuracy)
}

/// Mean cosine similarity over all unordered same-class pairs.
pub fn mean_within_class_cosine(vectors: &[Vec<f32>], labels: &[u8]) -> Result<f64> {
    if vectors.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: vectors.len(),
            right: labels.len(),
        });
    }
    let (mut sum, mut pairs) = (0.0, 0usize);
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            if labels[i] == labels[j] {
                sum += cosine_sim(&vectors[i], &vectors[j])?;
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::EmptyBatch);
    }
    Ok(sum / pairs as f64)
}
