//! Chat-completions request/response types and the endpoint trait.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Marker lines the prompt templates begin with; stubs dispatch on them.
pub const QUERY_TASK_MARKER: &str = "TASK: query-generation";
pub const PREDICTION_TASK_MARKER: &str = "TASK: trajectory-prediction";

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
    pub fn system(s: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: s.into() }
    }
    pub fn user(s: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: s.into() }
    }
    pub fn assistant(s: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: s.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChatRequest {
    /// The first user message; task markers live there.
    pub fn task_prompt(&self) -> &str {
        self.messages.iter().find(|m| m.role == Role::User).map(|m| m.content.as_str()).unwrap_or("")
    }

    pub fn is_task(&self, marker: &str) -> bool {
        self.task_prompt().lines().any(|l| l.trim() == marker)
    }

    /// Number of earlier assistant turns, i.e. how many repairs came before.
    pub fn attempt(&self) -> usize {
        self.messages.iter().filter(|m| m.role == Role::Assistant).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("endpoint unavailable: {0}")]
    Unavailable(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("unexpected response: {0}")]
    Protocol(String),
}

/// Anything that can answer a chat request. Implementations must accept
/// concurrent calls.
pub trait LlmEndpoint: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;

    fn describe(&self) -> String;
}

impl<T: LlmEndpoint + ?Sized> LlmEndpoint for &T {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<T: LlmEndpoint + ?Sized> LlmEndpoint for Box<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<T: LlmEndpoint + ?Sized> LlmEndpoint for std::sync::Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}
