//! Per-patient feature volumes and the `FVOL` file format.
//!
//! ```text
//! "FVOL" | version u32 | l u32 | d u32 | l·d × f32     (all little-endian, row-major)
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Real, SeqTensor};

pub const VOLUME_MAGIC: [u8; 4] = *b"FVOL";
pub const VOLUME_VERSION: u32 = 1;
/// Slice feature width produced by the reference backbone.
pub const FEATURE_DIM: usize = 2048;

const HEADER_LEN: usize = 16;

/// One patient's slice features: `len` rows of `dim` 32-bit values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume {
    pub patient_id: String,
    len: usize,
    dim: usize,
    features: Vec<f32>,
}

impl FeatureVolume {
    pub fn new(patient_id: impl Into<String>, len: usize, dim: usize, features: Vec<f32>) -> Result<Self> {
        if len == 0 {
            return Err(Error::EmptyVolume);
        }
        if dim == 0 || features.len() != len * dim {
            return Err(crate::error::shape_err(
                "feature volume",
                format!("{len}x{dim}"),
                features.len(),
            ));
        }
        if let Some(index) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            patient_id: patient_id.into(),
            len,
            dim,
            features,
        })
    }

    /// Number of slices.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.features[t * self.dim..(t + 1) * self.dim]
    }

    pub fn to_tensor<T: Real>(&self) -> SeqTensor<T> {
        let data = self
            .features
            .iter()
            .map(|&v| T::from(v).expect("f32 converts to any float type"))
            .collect();
        SeqTensor::new(self.len, self.dim, data).expect("volume invariants hold")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.features.len());
        out.extend_from_slice(&VOLUME_MAGIC);
        out.extend_from_slice(&VOLUME_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.features {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses an `FVOL` buffer. The patient id is not part of the format and
    /// is supplied by the caller.
    pub fn from_bytes(patient_id: impl Into<String>, bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncated(format!(
                "volume header needs {HEADER_LEN} bytes, file has {}",
                bytes.len()
            )));
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != VOLUME_MAGIC {
            return Err(Error::BadMagic {
                expected: VOLUME_MAGIC,
                found: magic,
            });
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != VOLUME_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                supported: VOLUME_VERSION,
            });
        }
        let (len, dim) = (word(8) as usize, word(12) as usize);
        if len == 0 {
            return Err(Error::EmptyVolume);
        }
        let payload = &bytes[HEADER_LEN..];
        let expected = len
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Truncated(format!("dimensions {len}x{dim} overflow")))?;
        if payload.len() < expected {
            return Err(Error::Truncated(format!(
                "{len}x{dim} volume needs {expected} payload bytes, found {}",
                payload.len()
            )));
        }
        if payload.len() > expected {
            return Err(crate::error::shape_err(
                "volume payload bytes",
                expected,
                payload.len(),
            ));
        }
        let features = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(patient_id, len, dim, features)
    }
}

pub fn write_volume(volume: &FeatureVolume, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&volume.to_bytes())?;
    w.flush()?;
    Ok(())
}

/// Reads a volume; the patient id defaults to the file stem.
pub fn read_volume(path: impl AsRef<Path>) -> Result<FeatureVolume> {
    let path = path.as_ref();
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    FeatureVolume::from_bytes(id, &fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FeatureVolume {
        let f = (0..12).map(|i| i as f32 * 0.25 - 1.0).collect();
        FeatureVolume::new("p0", 3, 4, f).unwrap()
    }

    #[test]
    fn header_layout() {
        let b = sample().to_bytes();
        assert_eq!(&b[0..4], b"FVOL");
        assert_eq!(&b[4..8], &1u32.to_le_bytes());
        assert_eq!(&b[8..12], &3u32.to_le_bytes());
        assert_eq!(&b[12..16], &4u32.to_le_bytes());
        assert_eq!(b.len(), 16 + 48);
    }

    #[test]
    fn distinct_errors() {
        let good = sample().to_bytes();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(FeatureVolume::from_bytes("p", &bad), Err(Error::BadMagic { .. })));

        let mut bad = good.clone();
        bad[4] = 9;
        assert!(matches!(
            FeatureVolume::from_bytes("p", &bad),
            Err(Error::UnsupportedVersion { found: 9, .. })
        ));

        assert!(matches!(
            FeatureVolume::from_bytes("p", &good[..good.len() - 3]),
            Err(Error::Truncated(_))
        ));
        assert!(matches!(FeatureVolume::from_bytes("p", &good[..7]), Err(Error::Truncated(_))));

        let mut long = good.clone();
        long.extend_from_slice(&[0; 4]);
        assert!(matches!(
            FeatureVolume::from_bytes("p", &long),
            Err(Error::ShapeMismatch { .. })
        ));

        let mut nan = good;
        nan[16..20].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            FeatureVolume::from_bytes("p", &nan),
            Err(Error::NonFinite { index: 0 })
        ));
    }

    #[test]
    fn non_2048_width_is_accepted_by_the_loader() {
        let v = FeatureVolume::from_bytes("p", &sample().to_bytes()).unwrap();
        assert_eq!(v.dim(), 4);
    }
}
