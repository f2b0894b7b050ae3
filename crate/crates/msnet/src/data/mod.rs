//! On-disk formats, synthetic volumes and patient-level splits.

mod manifest;
mod split;
mod synth;
mod volume;

pub use manifest::{load_manifest, write_manifest, Manifest, ManifestEntry, SplitTag};
pub use split::{split_dataset, split_indices, val_counts};
pub use synth::{generate_synthetic, LabeledVolume, SynthConfig};
pub use volume::{read_volume, write_volume, FeatureVolume, FEATURE_DIM, VOLUME_MAGIC, VOLUME_VERSION};
