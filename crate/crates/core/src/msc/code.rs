use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Input that does not fit the MSC 2020 code grammar.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed MSC code {0:?}")]
pub struct MalformedCode(pub String);

/// A two-digit top-level class such as `05` or `97`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TopClass(u8);

impl TopClass {
    pub fn new(number: u8) -> Option<Self> {
        (number < 100).then_some(TopClass(number))
    }

    pub fn number(self) -> u8 {
        self.0
    }

    pub fn as_code(self) -> MscCode {
        MscCode {
            top: self,
            area: None,
            subtopic: None,
            wildcard_sub: false,
        }
    }
}

impl fmt::Display for TopClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}", self.0)
    }
}

impl FromStr for TopClass {
    type Err = MalformedCode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let code = parse_code(s)?;
        if code.level() != Level::Top {
            return Err(MalformedCode(s.to_string()));
        }
        Ok(code.top)
    }
}

impl Serialize for TopClass {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TopClass {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Second-level designator.
///
/// `Special` is the `-` area used for reference works, proceedings, software
/// and similar kinds of material.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Area {
    Special,
    Letter(u8),
}

impl Area {
    fn as_char(self) -> char {
        match self {
            Area::Special => '-',
            Area::Letter(b) => b as char,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Top,
    Second,
    Third,
}

/// A parsed MSC 2020 code at one of the three levels.
///
/// Equality, ordering and hashing look only at the canonical form, so `30Fxx`
/// and `30F` compare equal; `wildcard_sub` just records how the code was written.
#[derive(Debug, Clone, Copy)]
pub struct MscCode {
    top: TopClass,
    area: Option<Area>,
    subtopic: Option<u8>,
    wildcard_sub: bool,
}

impl MscCode {
    pub fn top(&self) -> TopClass {
        self.top
    }

    pub fn area(&self) -> Option<Area> {
        self.area
    }

    pub fn subtopic(&self) -> Option<u8> {
        self.subtopic
    }

    /// True when the code was written with an `xx` third level.
    pub fn wildcard_sub(&self) -> bool {
        self.wildcard_sub
    }

    pub fn level(&self) -> Level {
        match (self.area, self.subtopic) {
            (None, _) => Level::Top,
            (Some(_), None) => Level::Second,
            (Some(_), Some(_)) => Level::Third,
        }
    }

    /// Projection onto the two-digit class.
    pub fn top_level(&self) -> MscCode {
        self.top.as_code()
    }

    /// The second-level code this code lives under, if it has one.
    pub fn second_level(&self) -> Option<MscCode> {
        self.area.map(|area| MscCode {
            top: self.top,
            area: Some(area),
            subtopic: None,
            wildcard_sub: false,
        })
    }

    /// Uppercase rendering; wildcard forms collapse to the bare level (`30F`, `68`).
    pub fn canonical(&self) -> String {
        self.to_string()
    }

    fn key(&self) -> (TopClass, Option<Area>, Option<u8>) {
        (self.top, self.area, self.subtopic)
    }
}

impl PartialEq for MscCode {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for MscCode {}

impl Hash for MscCode {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

impl PartialOrd for MscCode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MscCode {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl fmt::Display for MscCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.top)?;
        if let Some(area) = self.area {
            write!(f, "{}", area.as_char())?;
            if let Some(sub) = self.subtopic {
                write!(f, "{sub:02}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for MscCode {
    type Err = MalformedCode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_code(s)
    }
}

impl Serialize for MscCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MscCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_code(&s).map_err(serde::de::Error::custom)
    }
}

fn is_wildcard(a: u8, b: u8) -> bool {
    matches!(a, b'x' | b'X') && matches!(b, b'x' | b'X')
}

fn two_digits(a: u8, b: u8) -> Option<u8> {
    (a.is_ascii_digit() && b.is_ascii_digit()).then(|| (a - b'0') * 10 + (b - b'0'))
}

/// Parses one MSC 2020 code, ignoring surrounding whitespace.
///
/// Accepted shapes (case-insensitive): `DD`, `DDL`, `DD-`, `DDLDD`, `DDLxx`,
/// `DD-DD` and `DD-xx`. The last one names the whole top-level class.
pub fn parse_code(text: &str) -> Result<MscCode, MalformedCode> {
    let malformed = || MalformedCode(text.to_string());
    let bytes = text.trim().as_bytes();
    if bytes.len() < 2 {
        return Err(malformed());
    }
    let top = two_digits(bytes[0], bytes[1]).ok_or_else(malformed)?;
    let top = TopClass(top);
    let code = |area, subtopic, wildcard_sub| MscCode {
        top,
        area,
        subtopic,
        wildcard_sub,
    };
    match bytes[2..] {
        [] => Ok(code(None, None, false)),
        [b'-'] => Ok(code(Some(Area::Special), None, false)),
        [b'-', a, b] if is_wildcard(a, b) => Ok(code(None, None, true)),
        [b'-', a, b] => {
            let sub = two_digits(a, b).ok_or_else(malformed)?;
            Ok(code(Some(Area::Special), Some(sub), false))
        }
        [l] if l.is_ascii_alphabetic() => Ok(code(
            Some(Area::Letter(l.to_ascii_uppercase())),
            None,
            false,
        )),
        [l, a, b] if l.is_ascii_alphabetic() => {
            let area = Some(Area::Letter(l.to_ascii_uppercase()));
            if is_wildcard(a, b) {
                Ok(code(area, None, true))
            } else {
                let sub = two_digits(a, b).ok_or_else(malformed)?;
                Ok(code(area, Some(sub), false))
            }
        }
        _ => Err(malformed()),
    }
}

/// Keeps only the two-digit class of `code`.
pub fn top_level(code: &MscCode) -> MscCode {
    code.top_level()
}
