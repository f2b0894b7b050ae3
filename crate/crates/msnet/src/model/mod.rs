//! The multi-slice aggregation network.
//!
//! ```text
//! (l, 2048) ─ conv k_init ─▶ (l, 64) ─ 4 × residual block ─▶ (l, 64)
//!           ─ max over l ─▶ 64 ─ dense ─ relu ─▶ 32 ─ dense ─▶ 3 ─ softmax
//!
//! residual block(d):  x + pointwise(relu(conv_k3_dilated_d(x)))
//! ```
//!
//! Parameters live in one flat `f64` vector whose layout is fixed (see
//! [`MsNetModel::params`]) so checkpoints are portable.

mod arch;
mod checkpoint;
mod network;

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::FeatureVolume;
use crate::error::{Error, Result};
use crate::label::DiagnosisLabel;
use crate::tensor::{Real, SeqTensor};

pub use arch::{doubling_dilations, param_count, receptive_field, MsNetArch, REFERENCE_PARAM_COUNT};
pub(crate) use arch::ParamLayout;
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use network::ForwardCache;

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

/// Architecture plus trainable parameters.
#[derive(Debug, Clone)]
pub struct MsNetModel {
    arch: MsNetArch,
    layout: ParamLayout,
    params: Vec<f64>,
    seed: u64,
    // Identifies the current parameter state; forward caches carry it so a
    // backward pass against different parameters is rejected.
    stamp: u64,
}

impl PartialEq for MsNetModel {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch && self.params == other.params
    }
}

impl MsNetModel {
    /// Seeded initialization: convolutions draw from `N(0, 2/fan_in)`, dense
    /// layers from `U(±1/√fan_in)`, all biases start at zero.
    pub fn init(arch: MsNetArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let layout = ParamLayout::new(&arch);
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut convs = vec![&layout.input];
        for b in &layout.blocks {
            convs.push(&b.dilated);
            convs.push(&b.pointwise);
        }
        for slot in convs {
            let std = (2.0 / (slot.k * slot.cin) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            for p in &mut params[slot.weights.clone()] {
                *p = normal.sample(&mut rng);
            }
        }
        for slot in [&layout.hidden, &layout.output] {
            let bound = 1.0 / (slot.n_in as f64).sqrt();
            for p in &mut params[slot.weights.clone()] {
                *p = rng.random_range(-bound..bound);
            }
        }

        Ok(Self {
            arch,
            layout,
            params,
            seed,
            stamp: fresh_stamp(),
        })
    }

    pub fn from_params(arch: MsNetArch, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let layout = ParamLayout::new(&arch);
        if params.len() != layout.total {
            return Err(Error::ParamLengthMismatch {
                declared: params.len() as u64,
                expected: layout.total as u64,
            });
        }
        Ok(Self {
            arch,
            layout,
            params,
            seed: 0,
            stamp: fresh_stamp(),
        })
    }

    pub fn arch(&self) -> &MsNetArch {
        &self.arch
    }

    /// Seed used by [`MsNetModel::init`]; zero for models built from raw parameters.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The flat parameter vector.
    ///
    /// Layout: input conv `W (k, 2048, 64)`, `b`; for each block the dilated
    /// conv `W (3, 64, 64)`, `b` then the pointwise conv `W (1, 64, 64)`, `b`;
    /// hidden dense `W (64, 32)`, `b`; output dense `W (32, 3)`, `b`.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access. Invalidates outstanding forward caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.stamp = fresh_stamp();
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Every bias range in the parameter vector, in layout order.
    pub fn bias_ranges(&self) -> Vec<std::ops::Range<usize>> {
        self.layout.bias_ranges()
    }

    /// Parameter ranges (weights, bias) of block `i`'s two convolutions.
    pub fn block_ranges(&self, i: usize) -> Option<[std::ops::Range<usize>; 4]> {
        self.layout.blocks.get(i).map(|b| {
            [
                b.dilated.weights.clone(),
                b.dilated.bias.clone(),
                b.pointwise.weights.clone(),
                b.pointwise.bias.clone(),
            ]
        })
    }

    /// Forward pass on a 64-bit tensor, keeping every intermediate.
    pub fn forward_tensor(&self, input: SeqTensor<f64>) -> Result<ForwardCache<f64>> {
        network::forward(&self.arch, &self.layout, &self.params, input, self.stamp)
    }

    /// Class probabilities and the cache needed by [`MsNetModel::backward`].
    pub fn forward(&self, volume: &FeatureVolume) -> Result<(Vec<f64>, ForwardCache<f64>)> {
        self.check_volume(volume)?;
        let cache = self.forward_tensor(volume.to_tensor())?;
        Ok((cache.probs.clone(), cache))
    }

    /// Parameter gradient given `∂L/∂logits` (for softmax + cross-entropy,
    /// `w · (p − onehot)`).
    pub fn backward(&self, cache: &ForwardCache<f64>, d_logits: &[f64]) -> Result<Vec<f64>> {
        if cache.stamp != self.stamp {
            return Err(Error::StaleCache);
        }
        network::backward(&self.layout, &self.params, cache, d_logits)
    }

    pub fn predict(&self, volume: &FeatureVolume) -> Result<(DiagnosisLabel, Vec<f64>)> {
        let (probs, _) = self.forward(volume)?;
        Ok((argmax_label(&probs), probs))
    }

    /// A copy of the network in another precision, for inference only.
    pub fn inference<T: Real>(&self) -> InferenceModel<T> {
        InferenceModel {
            arch: self.arch.clone(),
            layout: self.layout.clone(),
            params: self.params.iter().map(|&p| T::from_f64_lossy(p)).collect(),
        }
    }

    fn check_volume(&self, volume: &FeatureVolume) -> Result<()> {
        if volume.dim() != self.arch.input_channels {
            return Err(Error::FeatureDim {
                expected: self.arch.input_channels,
                actual: volume.dim(),
            });
        }
        Ok(())
    }
}

/// Free-function form of [`MsNetModel::init`].
pub fn init_model(arch: MsNetArch, seed: u64) -> Result<MsNetModel> {
    MsNetModel::init(arch, seed)
}

/// Read-only network in precision `T`; the 32-bit instance backs the
/// latency benchmark.
#[derive(Debug, Clone)]
pub struct InferenceModel<T> {
    arch: MsNetArch,
    layout: ParamLayout,
    params: Vec<T>,
}

impl<T: Real> InferenceModel<T> {
    pub fn arch(&self) -> &MsNetArch {
        &self.arch
    }

    pub fn probs(&self, volume: &FeatureVolume) -> Result<Vec<T>> {
        if volume.dim() != self.arch.input_channels {
            return Err(Error::FeatureDim {
                expected: self.arch.input_channels,
                actual: volume.dim(),
            });
        }
        let cache = network::forward(&self.arch, &self.layout, &self.params, volume.to_tensor(), 0)?;
        Ok(cache.probs)
    }

    pub fn predict(&self, volume: &FeatureVolume) -> Result<(DiagnosisLabel, Vec<T>)> {
        let probs = self.probs(volume)?;
        Ok((argmax_label(&probs), probs))
    }
}

/// Index of the largest probability; exact ties go to the lowest index.
pub fn argmax_label<T: Real>(probs: &[T]) -> DiagnosisLabel {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    DiagnosisLabel::from_index(best).expect("network emits one probability per label")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MsNetArch {
        MsNetArch::tiny(5, 3)
    }

    fn volume(len: usize, dim: usize, seed: u64) -> FeatureVolume {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = (0..len * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        FeatureVolume::new("t", len, dim, f).unwrap()
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let a = MsNetModel::init(tiny(), 7).unwrap();
        let b = MsNetModel::init(tiny(), 7).unwrap();
        assert_eq!(a.params(), b.params());
        for r in a.bias_ranges() {
            assert!(a.params()[r].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax_label(&[0.2, 0.5, 0.3]), DiagnosisLabel::Cap);
        assert_eq!(argmax_label(&[0.4, 0.4, 0.2]), DiagnosisLabel::Covid);
        assert_eq!(argmax_label(&[0.2, 0.4, 0.4]), DiagnosisLabel::Cap);
    }

    #[test]
    fn wrong_feature_dim_rejected() {
        let m = MsNetModel::init(tiny(), 0).unwrap();
        assert!(matches!(
            m.forward(&volume(4, 6, 0)),
            Err(Error::FeatureDim { expected: 5, actual: 6 })
        ));
    }

    #[test]
    fn stale_cache_rejected() {
        let mut m = MsNetModel::init(tiny(), 0).unwrap();
        let (_, cache) = m.forward(&volume(6, 5, 1)).unwrap();
        m.params_mut()[0] += 1.0;
        assert!(matches!(m.backward(&cache, &[0.1, 0.2, -0.3]), Err(Error::StaleCache)));
        let other = MsNetModel::init(tiny(), 0).unwrap();
        assert!(matches!(other.backward(&cache, &[0.0; 3]), Err(Error::StaleCache)));
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let m = MsNetModel::init(tiny(), 3).unwrap();
        let (_, cache) = m.forward(&volume(9, 5, 2)).unwrap();
        let g = m.backward(&cache, &[0.0; 3]).unwrap();
        assert_eq!(g.len(), m.param_count());
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_slice_volume() {
        let m = MsNetModel::init(tiny(), 3).unwrap();
        let (p, _) = m.forward(&volume(1, 5, 2)).unwrap();
        assert_eq!(p.len(), 3);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
