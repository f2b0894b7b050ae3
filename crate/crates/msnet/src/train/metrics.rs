use std::borrow::Borrow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureVolume, LabeledVolume};
use crate::error::Result;
use crate::label::DiagnosisLabel;
use crate::model::{InferenceModel, MsNetModel};
use crate::tensor::Real;

/// Anything that maps a volume to a diagnosis.
pub trait Classifier: Sync {
    fn classify(&self, volume: &FeatureVolume) -> Result<DiagnosisLabel>;
}

impl Classifier for MsNetModel {
    fn classify(&self, volume: &FeatureVolume) -> Result<DiagnosisLabel> {
        self.predict(volume).map(|(l, _)| l)
    }
}

impl<T: Real> Classifier for InferenceModel<T> {
    fn classify(&self, volume: &FeatureVolume) -> Result<DiagnosisLabel> {
        self.predict(volume).map(|(l, _)| l)
    }
}

/// Latency statistics over individual volume timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub n: usize,
    pub total_seconds: f64,
    pub mean_seconds: f64,
    pub p50_seconds: f64,
    pub p95_seconds: f64,
}

impl TimingSummary {
    /// Percentiles use the nearest-rank rule on the sorted samples.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let rank = |p: f64| sorted[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
        let total: f64 = samples.iter().sum();
        Some(Self {
            n,
            total_seconds: total,
            mean_seconds: total / n as f64,
            p50_seconds: rank(0.50),
            p95_seconds: rank(0.95),
        })
    }
}

/// Confusion matrix (rows = truth, columns = prediction) and derived metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: [[usize; 3]; 3],
    /// Per-class recall; `None` (serialized as `null`) when the class has no
    /// ground-truth examples.
    pub sensitivity: [Option<f64>; 3],
    pub accuracy: f64,
    pub n_volumes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingSummary>,
}

impl EvalReport {
    pub fn from_confusion(confusion: [[usize; 3]; 3]) -> Self {
        let total: usize = confusion.iter().flatten().sum();
        let trace: usize = (0..3).map(|c| confusion[c][c]).sum();
        let sensitivity = [0, 1, 2].map(|c| {
            let row: usize = confusion[c].iter().sum();
            (row > 0).then(|| confusion[c][c] as f64 / row as f64)
        });
        Self {
            confusion,
            sensitivity,
            accuracy: if total > 0 { trace as f64 / total as f64 } else { 0.0 },
            n_volumes: total,
            timing: None,
        }
    }

    /// Builds a report from `(truth, prediction)` pairs.
    pub fn from_predictions(pairs: impl IntoIterator<Item = (DiagnosisLabel, DiagnosisLabel)>) -> Self {
        let mut confusion = [[0; 3]; 3];
        for (truth, pred) in pairs {
            confusion[truth.index()][pred.index()] += 1;
        }
        Self::from_confusion(confusion)
    }

    /// `(correct, total)` for one class.
    pub fn class_counts(&self, label: DiagnosisLabel) -> (usize, usize) {
        let row = &self.confusion[label.index()];
        (row[label.index()], row.iter().sum())
    }

    pub fn correct(&self) -> usize {
        (0..3).map(|c| self.confusion[c][c]).sum()
    }

    /// One line per class in the `correct/total` style, `NA` for absent classes.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for l in DiagnosisLabel::ALL {
            let (ok, n) = self.class_counts(l);
            match self.sensitivity[l.index()] {
                Some(v) => s.push_str(&format!("{:<7} {ok}/{n}  sensitivity {:.2}%\n", l.name(), 100.0 * v)),
                None => s.push_str(&format!("{:<7} NA\n", l.name())),
            }
        }
        s.push_str(&format!(
            "total   {}/{}  accuracy {:.2}%\n",
            self.correct(),
            self.n_volumes,
            100.0 * self.accuracy
        ));
        s
    }
}

/// Classifies every volume (in parallel) and tallies the results.
///
/// Accepts owned volumes or references (`&[LabeledVolume]` or `&[&LabeledVolume]`).
pub fn evaluate<C, D>(model: &C, data: &[D]) -> Result<EvalReport>
where
    C: Classifier + ?Sized,
    D: Borrow<LabeledVolume> + Sync,
{
    let preds = data
        .par_iter()
        .map(|d| {
            let d = d.borrow();
            model.classify(&d.volume).map(|p| (d.label, p))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_predictions(preds))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles_nearest_rank() {
        let t = TimingSummary::from_samples(&[5.0, 1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!(t.p50_seconds, 3.0);
        assert_eq!(t.p95_seconds, 5.0);
        assert_eq!(t.mean_seconds, t.total_seconds / 5.0);
        assert!(TimingSummary::from_samples(&[]).is_none());
    }

    #[test]
    fn perfect_predictions() {
        let pairs = DiagnosisLabel::ALL.into_iter().flat_map(|l| [(l, l), (l, l)]);
        let r = EvalReport::from_predictions(pairs);
        assert_eq!(r.confusion, [[2, 0, 0], [0, 2, 0], [0, 0, 2]]);
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.sensitivity, [Some(1.0); 3]);
    }

    #[test]
    fn absent_class_serializes_as_null() {
        use DiagnosisLabel::*;
        let r = EvalReport::from_predictions([(Normal, Normal), (Normal, Cap)]);
        assert_eq!(r.sensitivity, [None, None, Some(0.5)]);
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["sensitivity"][0].is_null());
        assert!(r.summary().contains("COVID   NA"));
    }
}
