//! Multi-slice aggregation network for patient-level diagnosis from CT
//! slice features.
//!
//! A scan of `l` slices arrives as an `(l, 2048)` feature volume, one row per
//! slice, produced by an image backbone that lives outside this crate. The
//! network projects each slice to 64 channels, mixes neighbouring slices
//! with four dilated residual blocks (dilations 1, 2, 4, 8, receptive field
//! 31 slices), max-pools over the whole sequence and classifies the pooled
//! 64-d descriptor as COVID, CAP or NORMAL. Because the pooling window is the
//! sequence itself, volumes of any length go through the same weights.
//!
//! Everything is written from scratch with explicit backward passes:
//!
//! - [`tensor`]: sequence tensors and per-layer forward/backward rules
//! - [`model`]: the network, its parameter layout and checkpoints
//! - [`loss`], [`optim`]: class-weighted cross-entropy and Adam
//! - [`data`]: volume files, manifests, synthetic data, stratified splits
//! - [`train`]: training loop, metrics and the latency benchmark
//! - [`gradcheck`]: finite-difference verification of the full model
//!
//! ```
//! use msnet::{MsNetArch, MsNetModel, gradcheck::random_volume};
//!
//! let model = MsNetModel::init(MsNetArch::tiny(16, 8), 42)?;
//! let volume = random_volume(37, 16, 0)?;
//! let (label, probs) = model.predict(&volume)?;
//! assert_eq!(probs.len(), 3);
//! assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
//! println!("{label}");
//! # Ok::<(), msnet::Error>(())
//! ```

pub mod data;
mod error;
pub mod gradcheck;
mod label;
pub mod loss;
pub mod model;
pub mod optim;
pub mod tensor;
pub mod train;

pub use data::{FeatureVolume, LabeledVolume};
pub use error::{Error, Result};
pub use label::{DiagnosisLabel, ParseLabelError};
pub use loss::ClassWeights;
pub use model::{MsNetArch, MsNetModel};
pub use train::{EvalReport, TrainConfig};

// The guide's code listings are compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/architecture.md")]
    mod architecture {}
    #[doc = include_str!("../../../book/src/gradients.md")]
    mod gradients {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
