use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::msc::{parse_code, MscCode, TopClass};

/// MSC codes attached to an arXiv record.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub codes: Vec<MscCode>,
    /// Tokens that failed the grammar but were kept at their top level.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub salvaged: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped: Vec<String>,
}

impl GroundTruth {
    pub fn top_set(&self) -> BTreeSet<TopClass> {
        self.codes.iter().map(MscCode::top).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

const QUALIFIERS: [&str; 4] = ["prim", "sec", "primary", "secondary"];

fn is_qualifier(token: &str) -> bool {
    let word = token.trim_end_matches(['.', ':']);
    QUALIFIERS.iter().any(|q| word.eq_ignore_ascii_case(q))
}

/// Parses an arXiv MSC field such as `(65 Prim; 76; 35 Sec)`.
///
/// Tokens failing the grammar but starting with two digits (`58A5`) are
/// salvaged to their class; anything else is dropped. Both are logged.
pub fn parse_ground_truth(field: &str) -> GroundTruth {
    let mut out = GroundTruth::default();
    let cleaned: String = field
        .chars()
        .map(|c| {
            if matches!(c, '(' | ')' | '[' | ']') {
                ' '
            } else {
                c
            }
        })
        .collect();
    for token in cleaned
        .split(|c: char| c == ';' || c == ',' || c.is_whitespace())
        .map(str::trim)
        .filter(|t| !t.is_empty())
    {
        if is_qualifier(token) {
            continue;
        }
        let code = match parse_code(token) {
            Ok(code) => code,
            Err(_) => match token.get(..2).and_then(|p| parse_code(p).ok()) {
                Some(top) => {
                    log::warn!(
                        "ground truth token {token:?} is not an MSC code; using class {top}"
                    );
                    out.salvaged.push(token.to_string());
                    top
                }
                None => {
                    log::warn!("ground truth token {token:?} dropped");
                    out.dropped.push(token.to_string());
                    continue;
                }
            },
        };
        if !out.codes.contains(&code) {
            out.codes.push(code);
        }
    }
    if out.codes.is_empty() {
        log::warn!("no MSC codes in ground truth field {field:?}");
    }
    out
}
