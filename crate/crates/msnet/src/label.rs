use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Patient-level diagnosis. The discriminant is the class index used by the
/// network output and by every per-class vector in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DiagnosisLabel {
    Covid = 0,
    Cap = 1,
    Normal = 2,
}

impl DiagnosisLabel {
    pub const COUNT: usize = 3;
    pub const ALL: [DiagnosisLabel; 3] = [Self::Covid, Self::Cap, Self::Normal];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self, Error> {
        Self::ALL.get(i).copied().ok_or(Error::InvalidLabel(i))
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Covid => "COVID",
            Self::Cap => "CAP",
            Self::Normal => "NORMAL",
        }
    }
}

impl fmt::Display for DiagnosisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label {0:?} (expected COVID, CAP or NORMAL)")]
pub struct ParseLabelError(pub String);

impl FromStr for DiagnosisLabel {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        Self::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| ParseLabelError(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_is_case_insensitive() {
        assert_eq!("covid".parse(), Ok(DiagnosisLabel::Covid));
        assert_eq!(" Cap ".parse(), Ok(DiagnosisLabel::Cap));
        assert_eq!("NORMAL".parse(), Ok(DiagnosisLabel::Normal));
        assert!("flu".parse::<DiagnosisLabel>().is_err());
    }

    #[test]
    fn indices_round_trip() {
        for l in DiagnosisLabel::ALL {
            assert_eq!(DiagnosisLabel::from_index(l.index()).unwrap(), l);
        }
        assert!(matches!(DiagnosisLabel::from_index(3), Err(Error::InvalidLabel(3))));
    }
}
