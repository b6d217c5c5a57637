//! Talking to chat-completion models: providers, retries, batching and the
//! audit trail.

pub mod audit;
pub mod gateway;
pub mod http;
pub mod mock;
pub mod provider;

pub use gateway::{classify_corpus, complete_chat, Classified, ClassifyContext, LlmRunConfig};
pub use provider::{ChatProvider, ChatRequest, ProviderError, ProviderReply};
