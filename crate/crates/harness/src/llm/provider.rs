use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Body of an OpenAI-compatible chat completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub top_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn system_text(&self) -> Option<&str> {
        self.message("system")
    }

    pub fn user_text(&self) -> Option<&str> {
        self.message("user")
    }

    fn message(&self, role: &str) -> Option<&str> {
        self.messages
            .iter()
            .find(|m| m.role == role)
            .map(|m| m.content.as_str())
    }
}

/// A successful provider round trip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderReply {
    /// The assistant message text.
    pub content: String,
    /// Response body exactly as received.
    pub raw_body: Vec<u8>,
    pub model: Option<String>,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

impl ProviderReply {
    /// A reply whose body is the content itself, as offline providers produce.
    pub fn text(content: impl Into<String>) -> Self {
        let content = content.into();
        Self {
            raw_body: content.clone().into_bytes(),
            content,
            model: None,
            prompt_tokens: None,
            completion_tokens: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed provider response: {message}")]
    Protocol { message: String, raw_body: Vec<u8> },
    #[error("{0}")]
    Credentials(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Transport(_) | ProviderError::Timeout => true,
            ProviderError::Status { status, .. } => *status == 429 || (500..600).contains(status),
            ProviderError::Protocol { .. } | ProviderError::Credentials(_) => false,
        }
    }

    pub fn is_auth(&self) -> bool {
        matches!(self, ProviderError::Status { status: 401 | 403, .. } | ProviderError::Credentials(_))
    }
}

/// Something that answers chat completion requests.
pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ProviderReply, ProviderError>;
}
