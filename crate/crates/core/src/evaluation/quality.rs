use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("quality score must be one of -2, -1, 0, +1, +2 (got {0})")]
pub struct InvalidScore(pub String);

/// Five-point human judgment of a differing item. Serialized as an integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QualityScore {
    WayOff,
    SlightlyOff,
    Arguable,
    SlightlyBetter,
    Better,
}

impl QualityScore {
    pub const ALL: [QualityScore; 5] = [
        QualityScore::Better,
        QualityScore::SlightlyBetter,
        QualityScore::Arguable,
        QualityScore::SlightlyOff,
        QualityScore::WayOff,
    ];

    pub fn value(self) -> i8 {
        match self {
            QualityScore::WayOff => -2,
            QualityScore::SlightlyOff => -1,
            QualityScore::Arguable => 0,
            QualityScore::SlightlyBetter => 1,
            QualityScore::Better => 2,
        }
    }

    pub fn from_value(value: i64) -> Result<Self, InvalidScore> {
        Ok(match value {
            -2 => QualityScore::WayOff,
            -1 => QualityScore::SlightlyOff,
            0 => QualityScore::Arguable,
            1 => QualityScore::SlightlyBetter,
            2 => QualityScore::Better,
            other => return Err(InvalidScore(other.to_string())),
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            QualityScore::Better => "LLM better than arXiv class",
            QualityScore::SlightlyBetter => "LLM slightly better than arXiv class",
            QualityScore::Arguable => "arguable either way",
            QualityScore::SlightlyOff => "LLM slightly off",
            QualityScore::WayOff => "LLM way off",
        }
    }

    /// `+2`, `+1`, `=`, `-1`, `-2`.
    pub fn symbol(self) -> &'static str {
        match self {
            QualityScore::Better => "+2",
            QualityScore::SlightlyBetter => "+1",
            QualityScore::Arguable => "=",
            QualityScore::SlightlyOff => "-1",
            QualityScore::WayOff => "-2",
        }
    }
}

impl fmt::Display for QualityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for QualityScore {
    type Err = InvalidScore;

    /// Accepts the symbols, plain integers and a Unicode minus sign.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().replace('\u{2212}', "-");
        if t == "=" {
            return Ok(QualityScore::Arguable);
        }
        let t = t.strip_prefix('+').unwrap_or(&t);
        t.parse::<i64>()
            .map_err(|_| InvalidScore(s.to_string()))
            .and_then(QualityScore::from_value)
    }
}

impl Serialize for QualityScore {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_i8(self.value())
    }
}

impl<'de> Deserialize<'de> for QualityScore {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(deserializer)?;
        QualityScore::from_value(v).map_err(serde::de::Error::custom)
    }
}
