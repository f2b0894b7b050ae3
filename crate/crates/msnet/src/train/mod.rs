//! Patient-level training, evaluation and latency measurement.
//!
//! Training processes one volume per step (volumes differ in length, so
//! there is no batching) with class-weighted cross-entropy and Adam. After
//! every epoch the validation accuracy is measured and the best model so far
//! is kept; ties keep the earlier epoch.

mod bench;
mod metrics;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{split_indices, FeatureVolume, LabeledVolume};
use crate::error::{Error, Result};
use crate::label::DiagnosisLabel;
use crate::loss::{cce_grad_logits, weighted_cce, ClassWeights};
use crate::model::{MsNetArch, MsNetModel};
use crate::optim::AdamState;

pub use bench::{benchmark, BenchReport};
pub use metrics::{evaluate, Classifier, EvalReport, TimingSummary};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;
pub const DEFAULT_EPOCHS: usize = 100;
pub const DEFAULT_VAL_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeighting {
    /// `N / (K · n_c)` from the training split.
    Balanced,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub class_weighting: ClassWeighting,
    pub val_fraction: f64,
    pub shuffle_each_epoch: bool,
    pub arch: MsNetArch,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: DEFAULT_LEARNING_RATE,
            epochs: DEFAULT_EPOCHS,
            seed: 0,
            class_weighting: ClassWeighting::Balanced,
            val_fraction: DEFAULT_VAL_FRACTION,
            shuffle_each_epoch: true,
            arch: MsNetArch::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("lr must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "val_fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        self.arch.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub class_weights: ClassWeights,
    pub train_size: usize,
    pub val_size: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the highest validation accuracy.
    pub best: MsNetModel,
    pub log: TrainingLog,
}

/// Owns a model and its optimizer state; one [`Trainer::step`] per volume.
#[derive(Debug, Clone)]
pub struct Trainer {
    model: MsNetModel,
    adam: AdamState,
    weights: ClassWeights,
}

impl Trainer {
    pub fn new(model: MsNetModel, lr: f64, weights: ClassWeights) -> Result<Self> {
        let adam = AdamState::new(model.param_count(), lr)?;
        Ok(Self {
            model,
            adam,
            weights,
        })
    }

    pub fn model(&self) -> &MsNetModel {
        &self.model
    }

    pub fn into_model(self) -> MsNetModel {
        self.model
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    /// Forward, backward and one Adam update on a single volume.
    ///
    /// A non-finite loss or gradient leaves the parameters untouched.
    pub fn step(&mut self, volume: &FeatureVolume, label: DiagnosisLabel) -> Result<StepOutcome> {
        let (probs, cache) = self.model.forward(volume)?;
        let loss = weighted_cce(&probs, label.index(), &self.weights)?;
        if !loss.is_finite() || probs.iter().any(|p| !p.is_finite()) {
            return Ok(StepOutcome::NonFinite(loss));
        }
        let d_logits = cce_grad_logits(&probs, label.index(), &self.weights)?;
        let grads = self.model.backward(&cache, &d_logits)?;
        if grads.iter().any(|g| !g.is_finite()) {
            return Ok(StepOutcome::NonFinite(loss));
        }
        self.adam.step(self.model.params_mut(), &grads)?;
        Ok(StepOutcome::Updated(loss))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    /// Loss before the update.
    Updated(f64),
    /// The loss (or its gradient) was not finite; nothing was changed.
    NonFinite(f64),
}

/// Stratified split by `config.val_fraction`, then [`train_with_split`].
pub fn train(dataset: &[LabeledVolume], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let labels: Vec<_> = dataset.iter().map(|d| d.label).collect();
    let (train_idx, val_idx) = split_indices(&labels, config.val_fraction, config.seed)?;
    let train_set: Vec<_> = train_idx.iter().map(|&i| &dataset[i]).collect();
    let val_set: Vec<_> = val_idx.iter().map(|&i| &dataset[i]).collect();
    train_with_split(&train_set, &val_set, config)
}

pub fn train_with_split(
    train_set: &[&LabeledVolume],
    val_set: &[&LabeledVolume],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "train and validation splits must be non-empty (got {} / {})",
            train_set.len(),
            val_set.len()
        )));
    }

    let mut counts = [0usize; 3];
    for d in train_set {
        counts[d.label.index()] += 1;
    }
    let weights = match config.class_weighting {
        ClassWeighting::Balanced => ClassWeights::from_counts(counts)?,
        ClassWeighting::None => ClassWeights::uniform(),
    };

    let model = MsNetModel::init(config.arch.clone(), config.seed)?;
    let mut trainer = Trainer::new(model, config.lr, weights)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut records = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, MsNetModel)> = None;

    for epoch in 1..=config.epochs {
        if config.shuffle_each_epoch {
            order.shuffle(&mut shuffle_rng);
        }
        let mut total = 0.0;
        for (step, &i) in order.iter().enumerate() {
            let d = train_set[i];
            match trainer.step(&d.volume, d.label)? {
                StepOutcome::Updated(loss) => total += loss,
                StepOutcome::NonFinite(loss) => {
                    return Err(Error::Diverged {
                        epoch,
                        step,
                        loss,
                        last_finite: Box::new(trainer.into_model()),
                    })
                }
            }
        }
        let train_loss = total / order.len() as f64;
        let val_accuracy = evaluate(trainer.model(), val_set)?.accuracy;
        records.push(EpochRecord {
            epoch,
            train_loss,
            val_accuracy,
        });
        if best.as_ref().map_or(true, |(_, acc, _)| val_accuracy > *acc) {
            best = Some((epoch, val_accuracy, trainer.model().clone()));
        }
    }

    let (best_epoch, best_val_accuracy, best_model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        best: best_model,
        log: TrainingLog {
            epochs: records,
            best_epoch,
            best_val_accuracy,
            class_weights: weights,
            train_size: train_set.len(),
            val_size: val_set.len(),
        },
    })
}

/// Free-function form of [`MsNetModel::predict`].
pub fn predict(model: &MsNetModel, volume: &FeatureVolume) -> Result<(DiagnosisLabel, Vec<f64>)> {
    model.predict(volume)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let c = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        let c = TrainConfig {
            lr: 0.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            val_fraction: 1.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn published_defaults() {
        let c = TrainConfig::default();
        assert_eq!(c.lr, 1e-4);
        assert_eq!(c.epochs, 100);
        assert_eq!(c.val_fraction, 0.3);
    }
}
