use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::code::{parse_code, Area, Level, MscCode, TopClass};

const SHIPPED: &str = include_str!("../../data/msc2020.tsv");

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("cannot read taxonomy {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: malformed code {text:?}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: duplicate code {code} (first defined on line {first})")]
    Duplicate {
        line: usize,
        code: String,
        first: usize,
    },
    #[error("line {line}: orphan code {code}, its parent {parent} is not defined")]
    Orphan {
        line: usize,
        code: String,
        parent: String,
    },
}

/// Outcome of checking a code against the code list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationStatus {
    Known,
    /// Well-formed but not in MSC 2020; a hallucination candidate.
    UnknownCode,
    Malformed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LevelCounts {
    pub top: usize,
    pub second: usize,
    pub third: usize,
}

impl LevelCounts {
    pub fn total(&self) -> usize {
        self.top + self.second + self.third
    }
}

impl fmt::Display for LevelCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {} / {}", self.top, self.second, self.third)
    }
}

/// The MSC 2020 code list. Immutable once loaded.
#[derive(Debug, Clone, Default)]
pub struct Taxonomy {
    entries: BTreeMap<MscCode, String>,
    counts: LevelCounts,
}

impl Taxonomy {
    /// The code list bundled with this crate.
    pub fn shipped() -> &'static Taxonomy {
        static SHIPPED_TAXONOMY: OnceLock<Taxonomy> = OnceLock::new();
        SHIPPED_TAXONOMY
            .get_or_init(|| Taxonomy::parse(SHIPPED).expect("bundled code list is consistent"))
    }

    /// Raw text of the bundled code list.
    pub fn shipped_source() -> &'static str {
        SHIPPED
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Taxonomy, TaxonomyError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Taxonomy::parse(&text)
    }

    /// Parses a two-column code list.
    ///
    /// Each record is `code<delim>description` where the delimiter is the
    /// first tab, semicolon or comma on the line; the description may be
    /// absent. Blank lines and `#` comments are skipped, as is a leading
    /// `code` header. Wildcard rows such as `00-XX` or `05Cxx` name the
    /// bare level.
    pub fn parse(text: &str) -> Result<Taxonomy, TaxonomyError> {
        let mut entries: BTreeMap<MscCode, (usize, String)> = BTreeMap::new();
        let mut seen_record = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let raw = raw.trim_start_matches('\u{feff}');
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let (code_text, description) = match raw.find(['\t', ';', ',']) {
                Some(pos) => (&raw[..pos], &raw[pos + 1..]),
                None => (raw, ""),
            };
            let code_text = unquote(code_text);
            if !seen_record && code_text.eq_ignore_ascii_case("code") {
                seen_record = true;
                continue;
            }
            seen_record = true;
            let code = parse_code(code_text).map_err(|_| TaxonomyError::Malformed {
                line,
                text: code_text.to_string(),
            })?;
            match entries.entry(code) {
                Entry::Occupied(first) => {
                    return Err(TaxonomyError::Duplicate {
                        line,
                        code: code.canonical(),
                        first: first.get().0,
                    })
                }
                Entry::Vacant(slot) => {
                    slot.insert((line, unquote(description).to_string()));
                }
            }
        }

        for (code, (line, _)) in &entries {
            if let Some(parent) = required_parent(code) {
                if !entries.contains_key(&parent) {
                    return Err(TaxonomyError::Orphan {
                        line: *line,
                        code: code.canonical(),
                        parent: parent.canonical(),
                    });
                }
            }
        }

        let mut counts = LevelCounts::default();
        for code in entries.keys() {
            match code.level() {
                Level::Top => counts.top += 1,
                Level::Second => counts.second += 1,
                Level::Third => counts.third += 1,
            }
        }
        let entries = entries
            .into_iter()
            .map(|(code, (_, description))| (code, description))
            .collect();
        Ok(Taxonomy { entries, counts })
    }

    pub fn level_counts(&self) -> LevelCounts {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&MscCode, &str)> {
        self.entries
            .iter()
            .map(|(code, desc)| (code, desc.as_str()))
    }

    pub fn top_classes(&self) -> Vec<TopClass> {
        self.entries
            .keys()
            .filter(|code| code.level() == Level::Top)
            .map(MscCode::top)
            .collect()
    }

    pub fn description(&self, code: &MscCode) -> Option<&str> {
        self.entries.get(code).map(String::as_str)
    }

    pub fn contains(&self, code: &MscCode) -> bool {
        self.validate(code) == ValidationStatus::Known
    }

    /// Known when the canonical form (wildcards collapse to the bare level) is
    /// listed. A bare `DD-` is known whenever its class is.
    pub fn validate(&self, code: &MscCode) -> ValidationStatus {
        let listed = self.entries.contains_key(code)
            || (code.area() == Some(Area::Special)
                && code.subtopic().is_none()
                && self.entries.contains_key(&code.top_level()));
        if listed {
            ValidationStatus::Known
        } else {
            ValidationStatus::UnknownCode
        }
    }

    /// Validates raw text, reporting grammar failures as `Malformed`.
    pub fn validate_text(&self, text: &str) -> ValidationStatus {
        match parse_code(text) {
            Ok(code) => self.validate(&code),
            Err(_) => ValidationStatus::Malformed,
        }
    }
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    s.strip_prefix('"')
        .and_then(|inner| inner.strip_suffix('"'))
        .unwrap_or(s)
        .trim()
}

/// The entry that must exist for `code` to be admissible.
///
/// Special-material codes such as `18-02` hang directly off their class:
/// published code lists carry no separate `18-` row.
fn required_parent(code: &MscCode) -> Option<MscCode> {
    match code.level() {
        Level::Top => None,
        Level::Second => Some(code.top_level()),
        Level::Third if code.area() == Some(Area::Special) => Some(code.top_level()),
        Level::Third => code.second_level(),
    }
}
