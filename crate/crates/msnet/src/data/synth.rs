//! Seeded synthetic feature volumes standing in for backbone output.
//!
//! Every slice is `base + N(0, σ²)` per channel, where `base` is one random
//! vector of norm `signal_strength` shared by the whole dataset. A class with
//! a positive band fraction `f` additionally gets its own fixed direction
//! (also of norm `signal_strength`) added to a contiguous run of `⌈f·l⌉`
//! slices at a random offset, so the evidence is localized along the slice
//! axis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::volume::{FeatureVolume, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::label::DiagnosisLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Patients per class, indexed by [`DiagnosisLabel::index`].
    pub patients_per_class: [usize; 3],
    /// Inclusive range of slice counts.
    pub slice_range: (usize, usize),
    pub noise_sigma: f64,
    pub signal_strength: f64,
    pub infected_band_fraction: [f64; 3],
    pub feature_dim: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            patients_per_class: [171, 60, 76],
            slice_range: (100, 200),
            noise_sigma: 0.1,
            signal_strength: 2.0,
            infected_band_fraction: [0.3, 0.15, 0.0],
            feature_dim: FEATURE_DIM,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let (lo, hi) = self.slice_range;
        if lo < 1 || hi < lo {
            return bad(format!("slice range must satisfy 1 <= min <= max, got {lo}..={hi}"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise sigma must be finite and >= 0, got {}", self.noise_sigma));
        }
        if !self.signal_strength.is_finite() {
            return bad("signal strength must be finite".into());
        }
        if self
            .infected_band_fraction
            .iter()
            .any(|f| !(0.0..=1.0).contains(f))
        {
            return bad(format!(
                "band fractions must lie in [0, 1], got {:?}",
                self.infected_band_fraction
            ));
        }
        if self.feature_dim == 0 {
            return bad("feature dimension must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledVolume {
    pub volume: FeatureVolume,
    pub label: DiagnosisLabel,
}

fn random_direction(rng: &mut ChaCha8Rng, dim: usize, norm: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x * norm / len).collect()
}

/// Generates the dataset class by class; patient ids are `<label>_<nnnn>`.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Vec<LabeledVolume>> {
    config.validate()?;
    let dim = config.feature_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let base = random_direction(&mut rng, dim, config.signal_strength);
    let directions: Vec<Vec<f64>> = (0..DiagnosisLabel::COUNT)
        .map(|_| random_direction(&mut rng, dim, config.signal_strength))
        .collect();
    let noise = Normal::new(0.0, config.noise_sigma).expect("validated sigma");

    let (lo, hi) = config.slice_range;
    let mut out = Vec::with_capacity(config.patients_per_class.iter().sum());
    for label in DiagnosisLabel::ALL {
        let fraction = config.infected_band_fraction[label.index()];
        let direction = &directions[label.index()];
        for i in 0..config.patients_per_class[label.index()] {
            let len = rng.random_range(lo..=hi);
            let band = ((fraction * len as f64).ceil() as usize).min(len);
            let start = if band > 0 { rng.random_range(0..=len - band) } else { 0 };

            let mut features = Vec::with_capacity(len * dim);
            for t in 0..len {
                let infected = band > 0 && (start..start + band).contains(&t);
                for c in 0..dim {
                    let mut v = base[c] + noise.sample(&mut rng);
                    if infected {
                        v += direction[c];
                    }
                    features.push(v as f32);
                }
            }
            let id = format!("{}_{i:04}", label.name().to_ascii_lowercase());
            out.push(LabeledVolume {
                volume: FeatureVolume::new(id, len, dim, features)?,
                label,
            });
        }
    }
    Ok(out)
}
