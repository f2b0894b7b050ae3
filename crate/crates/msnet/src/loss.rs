//! Softmax and class-weighted categorical cross-entropy.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::label::DiagnosisLabel;
use crate::tensor::Real;

/// Lower clamp on the probability inside the log.
pub const LOG_CLAMP: f64 = 1e-12;

/// Max-shifted softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| a.max(b));
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Per-class loss multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights(pub [f64; 3]);

impl ClassWeights {
    pub fn uniform() -> Self {
        Self([1.0; 3])
    }

    pub fn new(w: [f64; 3]) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "class weights must be finite and nonnegative: {w:?}"
            )));
        }
        if w.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidConfig("class weights are all zero".into()));
        }
        Ok(Self(w))
    }

    /// Balanced weights `N / (K · n_c)`, where `K` counts the classes that
    /// actually occur. Absent classes get weight 0.
    pub fn from_counts(counts: [usize; 3]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidConfig(
                "cannot derive class weights from all-zero counts".into(),
            ));
        }
        let k = counts.iter().filter(|&&n| n > 0).count() as f64;
        let w = counts.map(|n| {
            if n == 0 {
                0.0
            } else {
                total as f64 / (k * n as f64)
            }
        });
        Ok(Self(w))
    }

    pub fn get(&self, label: DiagnosisLabel) -> f64 {
        self.0[label.index()]
    }
}

impl Default for ClassWeights {
    fn default() -> Self {
        Self::uniform()
    }
}

/// Free-function form of [`ClassWeights::from_counts`].
pub fn class_weights_from_counts(counts: [usize; 3]) -> Result<ClassWeights> {
    ClassWeights::from_counts(counts)
}

fn label_index(probs: &[f64], label: usize) -> Result<usize> {
    if label >= probs.len() || label >= DiagnosisLabel::COUNT {
        return Err(Error::InvalidLabel(label));
    }
    Ok(label)
}

/// `−w[label] · ln(max(p[label], 1e−12))`.
pub fn weighted_cce(probs: &[f64], label: usize, weights: &ClassWeights) -> Result<f64> {
    let c = label_index(probs, label)?;
    let w = weights.0[c];
    if w == 0.0 {
        return Ok(0.0);
    }
    Ok(-w * probs[c].max(LOG_CLAMP).ln())
}

/// Gradient of [`weighted_cce`]∘[`softmax`] with respect to the logits:
/// `w[label] · (p − onehot(label))`.
pub fn cce_grad_logits(probs: &[f64], label: usize, weights: &ClassWeights) -> Result<Vec<f64>> {
    let c = label_index(probs, label)?;
    if probs.len() != DiagnosisLabel::COUNT {
        return Err(shape_err("probabilities", DiagnosisLabel::COUNT, probs.len()));
    }
    let w = weights.0[c];
    Ok(probs
        .iter()
        .enumerate()
        .map(|(i, &p)| w * (p - if i == c { 1.0 } else { 0.0 }))
        .collect())
}
