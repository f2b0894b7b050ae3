//! Versioned binary checkpoints.
//!
//! ```text
//! "MSNT"
//! version              u32
//! input_channels       u32
//! initial_conv_kernel  u32
//! block_count          u32
//! block_channels       u32
//! block_kernel         u32
//! dense_hidden         u32
//! classes              u32
//! dilation count       u32, then one u32 per dilation
//! param count          u64
//! params               f64 × param count
//! ```
//!
//! Everything is little-endian, so files are bit-identical across platforms.

use std::fs;
use std::path::Path;

use super::{MsNetArch, MsNetModel};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"MSNT";
pub const CHECKPOINT_VERSION: u32 = 1;

impl MsNetModel {
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let a = &self.arch;
        let mut out = Vec::with_capacity(64 + 8 * self.params.len());
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        let mut put = |v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
        put(CHECKPOINT_VERSION as usize);
        for v in [
            a.input_channels,
            a.initial_conv_kernel,
            a.block_count,
            a.block_channels,
            a.block_kernel,
            a.dense_hidden,
            a.classes,
            a.dilations.len(),
        ] {
            put(v);
        }
        for &d in &a.dilations {
            put(d);
        }
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::BadMagic {
                expected: CHECKPOINT_MAGIC,
                found: magic,
            });
        }
        let version = r.u32("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                supported: CHECKPOINT_VERSION,
            });
        }
        let mut fields = [0usize; 8];
        for f in &mut fields {
            *f = r.u32("architecture header")? as usize;
        }
        let [input_channels, initial_conv_kernel, block_count, block_channels, block_kernel, dense_hidden, classes, n_dilations] =
            fields;
        let dilations = (0..n_dilations)
            .map(|_| r.u32("dilations").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let arch = MsNetArch {
            input_channels,
            initial_conv_kernel,
            block_count,
            block_channels,
            block_kernel,
            dilations,
            dense_hidden,
            classes,
        };
        arch.validate()?;

        let declared = r.u64("parameter count")?;
        let expected = arch.param_count() as u64;
        if declared != expected {
            return Err(Error::ParamLengthMismatch { declared, expected });
        }
        let body = r.take(8 * expected as usize, "parameters")?;
        let params = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if r.pos != bytes.len() {
            return Err(Error::ShapeMismatch {
                context: "checkpoint length",
                expected: r.pos.to_string(),
                actual: bytes.len().to_string(),
            });
        }
        MsNetModel::from_params(arch, params)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Truncated(format!(
                "checkpoint ends inside {what} (offset {}, need {n} more bytes, {} left)",
                self.pos,
                self.bytes.len() - self.pos
            )));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn save_checkpoint(model: &MsNetModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model.to_checkpoint_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MsNetModel> {
    MsNetModel::from_checkpoint_bytes(&fs::read(path)?)
}
