use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::TimingSummary;
use crate::data::FeatureVolume;
use crate::error::{Error, Result};
use crate::label::DiagnosisLabel;
use crate::model::MsNetModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub timing: TimingSummary,
    pub repetitions: usize,
    pub warmup_volumes: usize,
    /// Labels from the first measured repetition, in input order.
    pub predictions: Vec<DiagnosisLabel>,
    /// Whether every repetition produced the same labels and probabilities.
    pub deterministic: bool,
}

/// Times 32-bit inference, one volume at a time on the calling thread.
///
/// The first `min(3, n)` volumes are run once untimed. File I/O is not
/// included: volumes are expected to be in memory already.
pub fn benchmark(model: &MsNetModel, volumes: &[FeatureVolume], repetitions: usize) -> Result<BenchReport> {
    if volumes.is_empty() {
        return Err(Error::InvalidConfig("benchmark needs at least one volume".into()));
    }
    if repetitions == 0 {
        return Err(Error::InvalidConfig("benchmark needs at least one repetition".into()));
    }
    let net = model.inference::<f32>();
    let warmup = volumes.len().min(3);
    for v in &volumes[..warmup] {
        net.probs(v)?;
    }

    let mut samples = Vec::with_capacity(volumes.len() * repetitions);
    let mut first: Option<Vec<(DiagnosisLabel, Vec<f32>)>> = None;
    let mut deterministic = true;
    for _ in 0..repetitions {
        let mut outputs = Vec::with_capacity(volumes.len());
        for v in volumes {
            let start = Instant::now();
            let out = net.predict(v)?;
            samples.push(start.elapsed().as_secs_f64());
            outputs.push(out);
        }
        match &first {
            None => first = Some(outputs),
            Some(f) => deterministic &= *f == outputs,
        }
    }

    Ok(BenchReport {
        timing: TimingSummary::from_samples(&samples).expect("at least one sample"),
        repetitions,
        warmup_volumes: warmup,
        predictions: first.unwrap().into_iter().map(|(l, _)| l).collect(),
        deterministic,
    })
}
