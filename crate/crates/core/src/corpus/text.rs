use std::sync::OnceLock;

use regex::Regex;

fn ligature(c: char) -> Option<&'static str> {
    Some(match c {
        '\u{FB00}' => "ff",
        '\u{FB01}' => "fi",
        '\u{FB02}' => "fl",
        '\u{FB03}' => "ffi",
        '\u{FB04}' => "ffl",
        '\u{FB05}' | '\u{FB06}' => "st",
        _ => return None,
    })
}

/// Ligature slots of the TeX OT1 encoding as they leak into copied PDF text.
fn control_ligature(c: char) -> Option<&'static str> {
    Some(match c {
        '\u{0B}' => "ff",
        '\u{0C}' => "fi",
        '\u{0D}' => "fl",
        '\u{0E}' => "ffi",
        '\u{0F}' => "ffl",
        _ => return None,
    })
}

fn hyphenation() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(\p{L})-[^\S\n]*\n\s*(\p{Ll})").expect("valid pattern"))
}

/// Cleans text for classification: expands ligatures (both the Unicode
/// presentation forms and leaked OT1 control codes), drops soft hyphens,
/// rejoins words hyphenated across line breaks and collapses whitespace.
///
/// Control codes only count as ligatures next to letters; `\r` needs a letter
/// on both sides since it is also an ordinary line ending.
pub fn normalize_text(raw: &str) -> String {
    let chars: Vec<char> = raw.chars().filter(|&c| c != '\u{AD}').collect();
    let mut expanded = String::with_capacity(raw.len());
    for (i, &c) in chars.iter().enumerate() {
        if let Some(s) = ligature(c) {
            expanded.push_str(s);
            continue;
        }
        if let Some(s) = control_ligature(c) {
            let next_letter = chars.get(i + 1).is_some_and(|n| n.is_alphabetic());
            let prev_letter = i > 0 && chars[i - 1].is_alphabetic();
            if next_letter && (c != '\r' || prev_letter) {
                expanded.push_str(s);
                continue;
            }
        }
        if c.is_control() && c != '\n' {
            expanded.push(' ');
        } else {
            expanded.push(c);
        }
    }
    let joined = hyphenation().replace_all(&expanded, "$1$2");
    joined.split_whitespace().collect::<Vec<_>>().join(" ")
}
