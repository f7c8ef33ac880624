use std::ops::Range;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::msc::{scan, MscCode, Taxonomy, Token, ValidationStatus};

use super::{ClassificationOutcome, Confidence, ValidationFlag};

/// Phrases that steer reply parsing. Wording drifts between model versions,
/// so the lists are data and can be loaded from JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueLexicon {
    pub primary: Vec<String>,
    pub secondary: Vec<String>,
    pub hedging: Vec<String>,
    pub refusal: Vec<String>,
}

impl Default for CueLexicon {
    fn default() -> Self {
        let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        CueLexicon {
            primary: owned(&["primary", "main classification", "principal"]),
            secondary: owned(&["secondary", "additional", "also relevant", "other relevant"]),
            hedging: owned(&[
                "likely",
                "can be classified",
                "probably",
                "may fall",
                "could be classified",
                "potentially",
            ]),
            refusal: owned(&[
                "challenging to classify",
                "lacks specific",
                "cannot classify",
                "unable to classify",
            ]),
        }
    }
}

fn squash_lower(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn cue_regex(cues: &[String]) -> Option<Regex> {
    if cues.is_empty() {
        return None;
    }
    let alternatives: Vec<String> = cues
        .iter()
        .map(|c| regex::escape(&squash_lower(c)).replace(' ', r"\s+"))
        .collect();
    Some(Regex::new(&format!(r"(?i)\b(?:{})\b", alternatives.join("|"))).expect("escaped cues"))
}

fn has_cue(text: &str, cues: &[String]) -> bool {
    cue_regex(cues).is_some_and(|re| re.is_match(&squash_lower(text)))
}

/// Definitive, hedged or refusal. A refusal needs a refusal cue and no
/// code anywhere in the reply.
pub fn detect_confidence(reply: &str, lexicon: &CueLexicon) -> Confidence {
    let has_codes = scan(reply).iter().any(|t| matches!(t, Token::Code { .. }));
    if !has_codes && has_cue(reply, &lexicon.refusal) {
        Confidence::Refusal
    } else if has_cue(reply, &lexicon.hedging) {
        Confidence::Hedged
    } else {
        Confidence::Definitive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    Primary,
    Secondary,
}

struct Compiled {
    primary: Option<Regex>,
    secondary: Option<Regex>,
}

impl Compiled {
    fn cues(&self, text: &str) -> Vec<(Range<usize>, Label)> {
        let mut out = Vec::new();
        for (re, label) in [
            (&self.primary, Label::Primary),
            (&self.secondary, Label::Secondary),
        ] {
            if let Some(re) = re {
                out.extend(re.find_iter(text).map(|m| (m.range(), label)));
            }
        }
        out.sort_by_key(|(r, _)| r.start);
        out
    }
}

/// Byte ranges of sentence-like units: lines, further cut after `.`, `!` or
/// `?` when followed by whitespace.
fn units(text: &str) -> Vec<Range<usize>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    for (i, &b) in bytes.iter().enumerate() {
        let cut = match b {
            b'\n' => Some(i),
            b'.' | b'!' | b'?' => bytes
                .get(i + 1)
                .is_none_or(|n| n.is_ascii_whitespace())
                .then_some(i + 1),
            _ => None,
        };
        if let Some(end) = cut {
            if start < end {
                out.push(start..end);
            }
            start = i + 1;
        }
    }
    if start < bytes.len() {
        out.push(start..bytes.len());
    }
    out
}

/// Clause boundaries inside a unit: `,` and `;` outside parentheses.
fn clause_of(unit: &str, at: usize) -> Range<usize> {
    let mut depth = 0i32;
    let mut start = 0;
    for (i, b) in unit.bytes().enumerate() {
        match b {
            b'(' | b'[' => depth += 1,
            b')' | b']' => depth -= 1,
            b',' | b';' if depth <= 0 => {
                if i >= at {
                    return start..i;
                }
                start = i + 1;
            }
            _ => {}
        }
    }
    start..unit.len()
}

fn label_for(unit: &str, code: &Range<usize>, cues: &[(Range<usize>, Label)]) -> Option<Label> {
    let clause = clause_of(unit, code.start);
    let in_clause = cues
        .iter()
        .filter(|(r, _)| r.start >= clause.start && r.end <= clause.end)
        .min_by_key(|(r, _)| {
            if r.end <= code.start {
                code.start - r.end
            } else {
                r.start.saturating_sub(code.end)
            }
        });
    if let Some((_, label)) = in_clause {
        return Some(*label);
    }
    cues.iter()
        .rfind(|(r, _)| r.end <= code.start)
        .map(|(_, label)| *label)
}

/// Turns model replies into primary and secondary code lists.
///
/// Codes take the label of the nearest primary/secondary cue in their clause,
/// else of the last cue earlier in the same sentence. Unlabelled codes in the
/// first code-bearing sentence of the first reply count as primary when no
/// code is labelled primary; all other unlabelled codes are secondary.
/// Repeats are dropped, keeping the first occurrence.
pub fn parse_outcome(
    replies: &[String],
    taxonomy: &Taxonomy,
    lexicon: &CueLexicon,
) -> ClassificationOutcome {
    let compiled = Compiled {
        primary: cue_regex(&lexicon.primary),
        secondary: cue_regex(&lexicon.secondary),
    };
    struct Found {
        code: MscCode,
        label: Option<Label>,
        lead: bool,
    }
    let mut found = Vec::new();
    let mut flags: Vec<ValidationFlag> = Vec::new();
    let mut push_flag = |flag: ValidationFlag| {
        if !flags.contains(&flag) {
            flags.push(flag);
        }
    };
    let mut lead_seen = false;
    for (reply_idx, reply) in replies.iter().enumerate() {
        for unit_range in units(reply) {
            let unit = &reply[unit_range];
            let cues = compiled.cues(unit);
            let mut had_code = false;
            for token in scan(unit) {
                match token {
                    Token::Code { code, span } => {
                        had_code = true;
                        found.push(Found {
                            code,
                            label: label_for(unit, &span, &cues),
                            lead: reply_idx == 0 && !lead_seen,
                        });
                    }
                    Token::Malformed { text, .. } => push_flag(ValidationFlag {
                        code: text.to_uppercase(),
                        status: ValidationStatus::Malformed,
                    }),
                }
            }
            if had_code && reply_idx == 0 {
                lead_seen = true;
            }
        }
    }

    let any_primary = found.iter().any(|f| f.label == Some(Label::Primary));
    let mut primary: Vec<MscCode> = Vec::new();
    let mut secondary: Vec<MscCode> = Vec::new();
    for f in &found {
        if primary.contains(&f.code) || secondary.contains(&f.code) {
            continue;
        }
        let label = f.label.unwrap_or(if f.lead && !any_primary {
            Label::Primary
        } else {
            Label::Secondary
        });
        if taxonomy.validate(&f.code) == ValidationStatus::UnknownCode {
            push_flag(ValidationFlag {
                code: f.code.canonical(),
                status: ValidationStatus::UnknownCode,
            });
        }
        match label {
            Label::Primary => primary.push(f.code),
            Label::Secondary => secondary.push(f.code),
        }
    }

    let all = replies.join("\n");
    let (confidence, refusal_text) = if primary.is_empty() && secondary.is_empty() {
        (Confidence::Refusal, Some(all.trim().to_string()))
    } else {
        match detect_confidence(&all, lexicon) {
            Confidence::Refusal => (Confidence::Definitive, None),
            c => (c, None),
        }
    };
    ClassificationOutcome {
        primary,
        secondary,
        confidence,
        refusal_text,
        validation_flags: flags,
        transcript: Vec::new(),
    }
}
