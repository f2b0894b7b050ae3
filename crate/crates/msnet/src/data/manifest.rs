//! CSV manifest: `patient_id,path,label,split`.
//!
//! Paths are resolved relative to the manifest's directory. Labels are
//! matched case-insensitively.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::synth::LabeledVolume;
use super::volume::read_volume;
use crate::error::{Error, Result};
use crate::label::DiagnosisLabel;

const HEADER: [&str; 4] = ["patient_id", "path", "label", "split"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        }
    }
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Self::Train),
            "val" => Ok(Self::Val),
            "test" => Ok(Self::Test),
            other => Err(format!("unknown split tag {other:?} (expected train, val or test)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub patient_id: String,
    /// Resolved path (manifest directory joined with the CSV value).
    pub path: PathBuf,
    pub label: DiagnosisLabel,
    pub split: SplitTag,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn with_split(&self, tag: SplitTag) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == tag)
    }

    /// Reads every referenced volume, tagging it with the manifest's patient id.
    pub fn load_volumes<'a>(
        entries: impl IntoIterator<Item = &'a ManifestEntry>,
    ) -> Result<Vec<LabeledVolume>> {
        entries
            .into_iter()
            .map(|e| {
                let mut volume = read_volume(&e.path)?;
                volume.patient_id = e.patient_id.clone();
                Ok(LabeledVolume {
                    volume,
                    label: e.label,
                })
            })
            .collect()
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;

    let header: Vec<String> = reader.headers()?.iter().map(str::to_ascii_lowercase).collect();
    if header != HEADER {
        return Err(Error::ManifestRow {
            row: 1,
            message: format!("header must be {}, found {}", HEADER.join(","), header.join(",")),
        });
    }

    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let bad = |message: String| Error::ManifestRow { row, message };

        let patient_id = field(0).to_string();
        if patient_id.is_empty() {
            return Err(bad("empty patient_id".into()));
        }
        let label = field(2)
            .parse::<DiagnosisLabel>()
            .map_err(|e| bad(e.to_string()))?;
        let split = field(3).parse::<SplitTag>().map_err(bad)?;
        if !seen.insert(patient_id.clone()) {
            return Err(Error::DuplicatePatient { row, id: patient_id });
        }
        let file = base.join(field(1));
        if !file.is_file() {
            return Err(Error::MissingFile { row, path: file });
        }
        entries.push(ManifestEntry {
            patient_id,
            path: file,
            label,
            split,
        });
    }
    Ok(Manifest { entries })
}

/// Writes a manifest; each path is written relative to the manifest
/// directory when possible.
pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HEADER)?;
    for e in &manifest.entries {
        let rel = e.path.strip_prefix(base).unwrap_or(&e.path);
        w.write_record([
            e.patient_id.as_str(),
            &rel.to_string_lossy(),
            e.label.name(),
            e.split.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
