use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ClassifierError;

pub const TITLE_TEMPLATE: &str = "Call the following text \"{id}-Title\": {title}";
pub const ABSTRACT_TEMPLATE: &str = "Call the following text \"{id}-Abstract\": {abstract}";
pub const CLASSIFY_TEMPLATE: &str = "Given the title \"{id}-Title\" and abstract \"{id}-Abstract\" classify the text according to the MSC 2020 classification.";
pub const SECONDARY_TEMPLATE: &str =
    "Please also give secondary MSC 2020 classifications for \"{id}-Title\" and \"{id}-Abstract\".";
pub const BROADEN_TEMPLATE: &str =
    "Which additional MSC 2020 areas could be relevant to \"{id}-Title\" and \"{id}-Abstract\"?";

const PLACEHOLDERS: [&str; 3] = ["id", "title", "abstract"];

/// Message templates sent for each item. `{id}`, `{title}` and `{abstract}`
/// are substituted in a single pass, so braces inside the inserted text are
/// left alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptProtocol {
    pub title_template: String,
    pub abstract_template: String,
    pub classify_template: String,
    pub secondary_followup: String,
    #[serde(default)]
    pub broaden_followup: Option<String>,
}

impl Default for PromptProtocol {
    fn default() -> Self {
        PromptProtocol {
            title_template: TITLE_TEMPLATE.into(),
            abstract_template: ABSTRACT_TEMPLATE.into(),
            classify_template: CLASSIFY_TEMPLATE.into(),
            secondary_followup: SECONDARY_TEMPLATE.into(),
            broaden_followup: None,
        }
    }
}

/// Values substituted into templates.
#[derive(Debug, Clone, Copy)]
pub struct PromptVars<'a> {
    pub id: &'a str,
    pub title: &'a str,
    pub abstract_text: &'a str,
}

impl PromptProtocol {
    pub fn with_broaden(mut self) -> Self {
        self.broaden_followup = Some(BROADEN_TEMPLATE.into());
        self
    }

    fn templates(&self) -> impl Iterator<Item = &str> {
        [
            Some(self.title_template.as_str()),
            Some(self.abstract_template.as_str()),
            Some(self.classify_template.as_str()),
            Some(self.secondary_followup.as_str()),
            self.broaden_followup.as_deref(),
        ]
        .into_iter()
        .flatten()
    }

    /// Rejects templates with placeholders other than the known three.
    pub fn check(&self) -> Result<(), ClassifierError> {
        for template in self.templates() {
            for name in placeholders(template) {
                if !PLACEHOLDERS.contains(&name) {
                    return Err(ClassifierError::Template(format!(
                        "unknown placeholder {{{name}}} in {template:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Hex SHA-256 over all templates, so edits invalidate cached transcripts.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for template in self.templates() {
            hasher.update(template.as_bytes());
            hasher.update([0x1f]);
        }
        hex::encode(hasher.finalize())
    }

    /// The title, abstract and classification messages for one item.
    pub fn render(&self, vars: PromptVars<'_>) -> Result<Vec<String>, ClassifierError> {
        self.check()?;
        if vars.title.trim().is_empty() {
            return Err(ClassifierError::InvalidItem(format!(
                "{}: empty title",
                vars.id
            )));
        }
        if vars.abstract_text.trim().is_empty() {
            return Err(ClassifierError::InvalidItem(format!(
                "{}: empty abstract",
                vars.id
            )));
        }
        Ok(vec![
            render(&self.title_template, vars),
            render(&self.abstract_template, vars),
            render(&self.classify_template, vars),
        ])
    }

    pub fn render_secondary(&self, vars: PromptVars<'_>) -> String {
        render(&self.secondary_followup, vars)
    }

    pub fn render_broaden(&self, vars: PromptVars<'_>) -> Option<String> {
        self.broaden_followup.as_deref().map(|t| render(t, vars))
    }
}

fn placeholders(template: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        match after.find('}') {
            Some(end)
                if after[..end]
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_') =>
            {
                out.push(&after[..end]);
                rest = &after[end + 1..];
            }
            _ => rest = after,
        }
    }
    out
}

fn render(template: &str, vars: PromptVars<'_>) -> String {
    let mut out = String::with_capacity(template.len() + vars.abstract_text.len());
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        let value = after.find('}').and_then(|end| {
            let v = match &after[..end] {
                "id" => vars.id,
                "title" => vars.title,
                "abstract" => vars.abstract_text,
                _ => return None,
            };
            Some((v, end))
        });
        match value {
            Some((v, end)) => {
                out.push_str(v);
                rest = &after[end + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars<'a>(title: &'a str, abstract_text: &'a str) -> PromptVars<'a> {
        PromptVars {
            id: "2403.16849",
            title,
            abstract_text,
        }
    }

    #[test]
    fn renders_three_messages() {
        let msgs = PromptProtocol::default()
            .render(vars("On things", "We study {id} and <x>."))
            .unwrap();
        assert_eq!(msgs.len(), 3);
        assert!(msgs[0].starts_with("Call the following text \"2403.16849-Title\":"));
        assert_eq!(
            msgs[1],
            "Call the following text \"2403.16849-Abstract\": We study {id} and <x>."
        );
        assert_eq!(
            msgs[2],
            "Given the title \"2403.16849-Title\" and abstract \"2403.16849-Abstract\" classify the text according to the MSC 2020 classification."
        );
    }

    #[test]
    fn empty_fields_are_rejected() {
        let p = PromptProtocol::default();
        assert!(matches!(
            p.render(vars("t", " ")),
            Err(ClassifierError::InvalidItem(_))
        ));
        assert!(p.render(vars("", "a")).is_err());
    }

    #[test]
    fn hash_tracks_templates() {
        let base = PromptProtocol::default();
        assert_eq!(base.hash(), PromptProtocol::default().hash());
        assert_ne!(base.hash(), base.clone().with_broaden().hash());
        assert_eq!(base.hash().len(), 64);
    }

    #[test]
    fn unknown_placeholders_are_caught() {
        let mut p = PromptProtocol::default();
        assert!(p.check().is_ok());
        p.classify_template.push_str(" {lang}");
        assert!(p.check().is_err());
    }
}
