use std::ops::Range;

use serde::Serialize;

use super::code::{parse_code, MscCode};
use super::taxonomy::{Taxonomy, ValidationStatus};

/// One code-shaped run found in free text. Spans are byte ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Code {
        code: MscCode,
        span: Range<usize>,
    },
    /// Looks like a code but fails the grammar, e.g. `85A-XX`.
    Malformed {
        text: String,
        span: Range<usize>,
    },
}

impl Token {
    pub fn span(&self) -> Range<usize> {
        match self {
            Token::Code { span, .. } | Token::Malformed { span, .. } => span.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CodeHit {
    pub code: MscCode,
    pub status: ValidationStatus,
    pub span: Range<usize>,
}

fn is_word(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn is_wild(b: u8) -> bool {
    b == b'x' || b == b'X'
}

/// Length of the longest code-shaped run starting at `i` (which holds two digits).
fn candidate_len(bytes: &[u8], i: usize) -> (usize, bool) {
    let at = |k: usize| bytes.get(i + k).copied();
    let digit = |k: usize| at(k).is_some_and(|b| b.is_ascii_digit());
    let wild = |k: usize| at(k).is_some_and(is_wild);
    let pair = |k: usize| (digit(k) && digit(k + 1)) || (wild(k) && wild(k + 1));
    match at(2) {
        Some(b'-') if pair(3) => (5, false),
        Some(b'-') => (3, false),
        Some(l) if l.is_ascii_alphabetic() => {
            // Hybrids like 85A-XX are kept whole so they can be flagged.
            if at(3) == Some(b'-') && pair(4) {
                (6, true)
            } else if pair(3) {
                (5, false)
            } else {
                (3, false)
            }
        }
        _ => (2, false),
    }
}

fn left_ok(bytes: &[u8], i: usize) -> bool {
    if i == 0 {
        return true;
    }
    let prev = bytes[i - 1];
    if is_word(prev) || prev == b'/' {
        return false;
    }
    if prev == b'.' || prev == b'-' {
        return !(i >= 2 && bytes[i - 2].is_ascii_digit());
    }
    true
}

fn right_ok(bytes: &[u8], end: usize) -> bool {
    match bytes.get(end) {
        None => true,
        Some(&b) if is_word(b) => false,
        Some(b'.') | Some(b'-') => !bytes.get(end + 1).is_some_and(u8::is_ascii_digit),
        Some(_) => true,
    }
}

/// Finds code-shaped runs with word boundaries on both sides.
///
/// A trailing `-` is only treated as part of a code when it is not followed
/// by another word character, so `68-xx` and `18-02` come out whole and
/// identifiers like `2403.05604` or `hep-th/9807008` produce nothing.
pub fn scan(text: &str) -> Vec<Token> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i + 1 < bytes.len() {
        if !(bytes[i].is_ascii_digit() && bytes[i + 1].is_ascii_digit()) || !left_ok(bytes, i) {
            i += 1;
            continue;
        }
        let (full, hybrid) = candidate_len(bytes, i);
        // Fall back to a shorter shape when the longer one is glued to more text.
        let len = [full, 3, 2]
            .into_iter()
            .filter(|&n| n <= full && (n == full || !hybrid))
            .find(|&n| right_ok(bytes, i + n))
            .unwrap_or(0);
        if len == 0 {
            // Skip the whole word run so its inner digits are not picked up.
            while i < bytes.len() && is_word(bytes[i]) {
                i += 1;
            }
            continue;
        }
        let span = i..i + len;
        let slice = &text[span.clone()];
        match parse_code(slice) {
            Ok(code) if !hybrid => out.push(Token::Code { code, span }),
            _ => out.push(Token::Malformed {
                text: slice.to_string(),
                span,
            }),
        }
        i += len;
    }
    out
}

/// Well-formed codes found in `text`, in text order, each with its status
/// against `taxonomy`.
pub fn extract_codes(text: &str, taxonomy: &Taxonomy) -> Vec<CodeHit> {
    scan(text)
        .into_iter()
        .filter_map(|token| match token {
            Token::Code { code, span } => Some(CodeHit {
                status: taxonomy.validate(&code),
                code,
                span,
            }),
            Token::Malformed { .. } => None,
        })
        .collect()
}
