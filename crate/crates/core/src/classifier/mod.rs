//! Drives a chat model through the prompt protocol for one item and turns the
//! replies into primary and secondary MSC codes.

mod parse;
mod protocol;
mod provider;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::PaperItem;
use crate::msc::{MscCode, Taxonomy, ValidationStatus};
use crate::net::TransportError;
use crate::store::{StoreError, TranscriptCache, TranscriptKey};

pub use parse::{detect_confidence, parse_outcome, CueLexicon};
pub use protocol::{PromptProtocol, PromptVars};
pub use provider::{
    ChatMessage, ChatProvider, HttpChatProvider, ReplayProvider, Role, ScriptedProvider,
    DEFAULT_ENDPOINT, DEFAULT_KEY_ENV,
};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("{0}")]
    InvalidItem(String),
    #[error("invalid prompt template: {0}")]
    Template(String),
    #[error("no cached transcript for {arxiv_id} (model {model_id})")]
    NoCachedTranscript { arxiv_id: String, model_id: String },
    #[error("{arxiv_id}: {source}")]
    Transport {
        arxiv_id: String,
        #[source]
        source: TransportError,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Definitive,
    Hedged,
    Refusal,
}

/// A suspect code met while parsing: unknown to MSC 2020, or malformed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationFlag {
    pub code: String,
    pub status: ValidationStatus,
}

/// One provider round trip: the user messages sent and the reply received.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub prompts: Vec<String>,
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationOutcome {
    pub primary: Vec<MscCode>,
    pub secondary: Vec<MscCode>,
    pub confidence: Confidence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refusal_text: Option<String>,
    #[serde(default)]
    pub validation_flags: Vec<ValidationFlag>,
    #[serde(default)]
    pub transcript: Vec<Exchange>,
}

impl ClassificationOutcome {
    pub fn replies(&self) -> Vec<String> {
        self.transcript.iter().map(|e| e.reply.clone()).collect()
    }
}

/// Everything `classify` needs besides the item.
pub struct Classifier<'a> {
    pub provider: &'a dyn ChatProvider,
    pub protocol: &'a PromptProtocol,
    pub taxonomy: &'a Taxonomy,
    pub lexicon: &'a CueLexicon,
    pub cache: Option<&'a TranscriptCache>,
}

impl Classifier<'_> {
    pub fn key(&self, item: &PaperItem) -> TranscriptKey {
        TranscriptKey {
            arxiv_id: item.arxiv_id.clone(),
            protocol_hash: self.protocol.hash(),
            model_id: self.provider.model_id().to_string(),
        }
    }

    /// Classifies one item in a fresh conversation.
    pub fn classify(&self, item: &PaperItem) -> Result<ClassificationOutcome, ClassifierError> {
        self.classify_in(item, &mut Vec::new())
    }

    /// Classifies one item, continuing the conversation in `history`.
    ///
    /// Cached transcripts are replayed without contacting the provider. When
    /// the first reply names primary codes but no secondary ones, a single
    /// follow-up asks for them; the broaden prompt is sent only when the
    /// protocol carries one.
    pub fn classify_in(
        &self,
        item: &PaperItem,
        history: &mut Vec<ChatMessage>,
    ) -> Result<ClassificationOutcome, ClassifierError> {
        let key = self.key(item);
        if let Some(cache) = self.cache {
            if let Some(entry) = cache.lookup(&key)? {
                log::debug!("replaying cached transcript for {}", item.arxiv_id);
                let mut outcome = parse_outcome(
                    &entry
                        .exchanges
                        .iter()
                        .map(|e| e.reply.clone())
                        .collect::<Vec<_>>(),
                    self.taxonomy,
                    self.lexicon,
                );
                for exchange in &entry.exchanges {
                    history.extend(exchange.prompts.iter().cloned().map(ChatMessage::user));
                    history.push(ChatMessage::assistant(exchange.reply.clone()));
                }
                outcome.transcript = entry.exchanges;
                return Ok(outcome);
            }
        }
        if self.provider.cache_only() {
            return Err(ClassifierError::NoCachedTranscript {
                arxiv_id: item.arxiv_id.clone(),
                model_id: key.model_id,
            });
        }

        let vars = PromptVars {
            id: &item.arxiv_id,
            title: &item.title,
            abstract_text: &item.abstract_text,
        };
        let mut exchanges = Vec::new();
        let replies = |ex: &[Exchange]| ex.iter().map(|e| e.reply.clone()).collect::<Vec<_>>();
        self.round_trip(item, history, &mut exchanges, self.protocol.render(vars)?)?;
        let first = parse_outcome(&replies(&exchanges), self.taxonomy, self.lexicon);
        if !first.primary.is_empty() && first.secondary.is_empty() {
            let prompt = self.protocol.render_secondary(vars);
            self.round_trip(item, history, &mut exchanges, vec![prompt])?;
        }
        if let Some(prompt) = self.protocol.render_broaden(vars) {
            self.round_trip(item, history, &mut exchanges, vec![prompt])?;
        }
        let mut outcome = parse_outcome(&replies(&exchanges), self.taxonomy, self.lexicon);
        outcome.transcript = exchanges;

        if let Some(cache) = self.cache {
            match cache.put(&key, &outcome.transcript) {
                Ok(()) | Err(StoreError::DuplicateEntry(_)) => {}
                Err(err) => return Err(err.into()),
            }
        }
        Ok(outcome)
    }

    fn round_trip(
        &self,
        item: &PaperItem,
        history: &mut Vec<ChatMessage>,
        exchanges: &mut Vec<Exchange>,
        prompts: Vec<String>,
    ) -> Result<(), ClassifierError> {
        history.extend(prompts.iter().cloned().map(ChatMessage::user));
        let reply =
            self.provider
                .complete(history)
                .map_err(|source| ClassifierError::Transport {
                    arxiv_id: item.arxiv_id.clone(),
                    source,
                })?;
        history.push(ChatMessage::assistant(reply.clone()));
        exchanges.push(Exchange { prompts, reply });
        Ok(())
    }

    /// Classifies items with at most `concurrency` in flight, or one shared
    /// conversation when `session` is set. Results keep item order.
    pub fn classify_all(
        &self,
        items: &[PaperItem],
        concurrency: usize,
        session: bool,
    ) -> Vec<Result<ClassificationOutcome, ClassifierError>> {
        if session || concurrency <= 1 || !self.provider.supports_concurrency() {
            let mut history = Vec::new();
            return items
                .iter()
                .map(|item| {
                    if session {
                        self.classify_in(item, &mut history)
                    } else {
                        self.classify(item)
                    }
                })
                .collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(concurrency)
            .build()
            .expect("thread pool");
        pool.install(|| items.par_iter().map(|item| self.classify(item)).collect())
    }
}
