use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::net::{RetryPolicy, TransportError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Something that answers an ordered conversation with one reply.
pub trait ChatProvider: Send + Sync {
    fn model_id(&self) -> &str;

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, TransportError>;

    /// Providers that only serve cached transcripts never reach the network.
    fn cache_only(&self) -> bool {
        false
    }

    /// Whether one instance may be driven from several threads at once.
    fn supports_concurrency(&self) -> bool {
        true
    }
}

pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1";
pub const DEFAULT_KEY_ENV: &str = "OPENAI_API_KEY";

/// OpenAI-compatible `/chat/completions` client.
pub struct HttpChatProvider {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    temperature: Option<f64>,
}

impl HttpChatProvider {
    /// The API key is read from the environment variable `key_env`; endpoints
    /// that need no key work with the variable unset.
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        key_env: &str,
        retry: RetryPolicy,
    ) -> Result<Self, TransportError> {
        let api_key = std::env::var(key_env).ok().filter(|k| !k.is_empty());
        if api_key.is_none() {
            log::warn!("{key_env} is not set; calling the chat endpoint without credentials");
        }
        let client = reqwest::blocking::Client::builder()
            .user_agent(concat!("mscbench/", env!("CARGO_PKG_VERSION")))
            .timeout(Duration::from_secs(180))
            .build()?;
        Ok(HttpChatProvider {
            client,
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            model: model.into(),
            api_key,
            retry,
            temperature: None,
        })
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = Some(temperature);
        self
    }
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

impl ChatProvider for HttpChatProvider {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, TransportError> {
        let url = format!("{}/chat/completions", self.endpoint);
        let mut body = json!({ "model": self.model, "messages": messages });
        if let Some(t) = self.temperature {
            body["temperature"] = json!(t);
        }
        self.retry.run(|| {
            let mut req = self.client.post(&url).json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let resp: CompletionResponse = req.send()?.error_for_status()?.json()?;
            resp.choices
                .into_iter()
                .next()
                .and_then(|c| c.message.content)
                .ok_or_else(|| TransportError::Decode("completion without content".into()))
        })
    }
}

/// Serves cached transcripts only; any attempt to reach the model fails.
pub struct ReplayProvider {
    model: String,
}

impl ReplayProvider {
    pub fn new(model: impl Into<String>) -> Self {
        ReplayProvider {
            model: model.into(),
        }
    }
}

impl ChatProvider for ReplayProvider {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, _messages: &[ChatMessage]) -> Result<String, TransportError> {
        Err(TransportError::NotCached(
            "replay provider has no live model".into(),
        ))
    }

    fn cache_only(&self) -> bool {
        true
    }
}

/// Fixed replies per arXiv id, for tests and offline demos.
///
/// The id is read from the `"<id>-Title"` reference in the conversation;
/// the key `*` supplies replies for ids without their own script. The n-th
/// reply is returned once the model has already answered n times for the item.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScriptedProvider {
    #[serde(default = "mock_model")]
    pub model: String,
    pub replies: BTreeMap<String, Vec<String>>,
}

fn mock_model() -> String {
    "mock".into()
}

impl ScriptedProvider {
    pub fn new(model: impl Into<String>) -> Self {
        ScriptedProvider {
            model: model.into(),
            replies: BTreeMap::new(),
        }
    }

    pub fn script(mut self, arxiv_id: &str, replies: &[&str]) -> Self {
        self.replies.insert(
            arxiv_id.to_string(),
            replies.iter().map(|r| r.to_string()).collect(),
        );
        self
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn referenced_id(message: &str) -> Option<&str> {
    let end = message.find("-Title\"")?;
    let start = message[..end].rfind('"')? + 1;
    Some(&message[start..end])
}

impl ChatProvider for ScriptedProvider {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, TransportError> {
        if messages.is_empty() {
            return Err(TransportError::Decode("empty conversation".into()));
        }
        let id = messages
            .iter()
            .rev()
            .filter(|m| m.role == Role::User)
            .find_map(|m| referenced_id(&m.content))
            .unwrap_or("*");
        let opening = messages
            .iter()
            .position(|m| m.role == Role::User && referenced_id(&m.content) == Some(id))
            .unwrap_or(0);
        let answered = messages[opening..]
            .iter()
            .filter(|m| m.role == Role::Assistant)
            .count();
        let script = self
            .replies
            .get(id)
            .or_else(|| self.replies.get("*"))
            .ok_or_else(|| TransportError::Decode(format!("no scripted replies for {id}")))?;
        script.get(answered).cloned().ok_or_else(|| {
            TransportError::Decode(format!("script for {id} has no reply {}", answered + 1))
        })
    }
}
