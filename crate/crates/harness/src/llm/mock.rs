//! Offline providers.

use std::collections::VecDeque;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::provider::{ChatProvider, ChatRequest, ProviderError, ProviderReply};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeywordRule {
    pub keyword: String,
    pub label: String,
}

/// Labels each document with the first rule whose keyword occurs in it
/// (case-insensitive substring), or with `fallback`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeywordMock {
    pub rules: Vec<KeywordRule>,
    pub fallback: String,
    /// Wrap the JSON answer in chatty prose.
    #[serde(default)]
    pub chatty: bool,
}

impl KeywordMock {
    pub fn label_for(&self, text: &str) -> &str {
        let text = text.to_lowercase();
        self.rules
            .iter()
            .find(|r| text.contains(&r.keyword.to_lowercase()))
            .map_or(self.fallback.as_str(), |r| r.label.as_str())
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.rules
            .iter()
            .map(|r| r.label.as_str())
            .chain([self.fallback.as_str()])
    }
}

impl ChatProvider for KeywordMock {
    fn complete(&self, request: &ChatRequest) -> Result<ProviderReply, ProviderError> {
        let payload = request.user_text().unwrap_or_default();
        let mut answer = serde_json::Map::new();
        for line in payload.lines() {
            if let Some((index, text)) = line.split_once(". ") {
                answer.insert(index.trim().to_string(), self.label_for(text).into());
            }
        }
        let json = serde_json::Value::Object(answer).to_string();
        let content = if self.chatty {
            format!("Sure! Here are the categories:\n{json}\nLet me know if you need anything else.")
        } else {
            json
        };
        let mut reply = ProviderReply::text(content);
        reply.model = Some(format!("{}-keyword-mock", request.model));
        Ok(reply)
    }
}

/// Replays a fixed script of outcomes, one per call, and records the
/// requests it saw.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    script: Mutex<VecDeque<Result<ProviderReply, ProviderError>>>,
    seen: Mutex<Vec<ChatRequest>>,
}

impl ScriptedProvider {
    pub fn new(script: impl IntoIterator<Item = Result<ProviderReply, ProviderError>>) -> Self {
        Self {
            script: Mutex::new(script.into_iter().collect()),
            seen: Mutex::default(),
        }
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.seen.lock().unwrap().clone()
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ProviderReply, ProviderError> {
        self.seen.lock().unwrap().push(request.clone());
        self.script.lock().unwrap().pop_front().unwrap_or_else(|| {
            Err(ProviderError::Protocol {
                message: "script exhausted".into(),
                raw_body: Vec::new(),
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::provider::ChatMessage;

    fn mock() -> KeywordMock {
        KeywordMock {
            rules: vec![
                KeywordRule { keyword: "FREE".into(), label: "spam".into() },
                KeywordRule { keyword: "win".into(), label: "spam".into() },
            ],
            fallback: "ham".into(),
            chatty: false,
        }
    }

    #[test]
    fn first_matching_rule_wins() {
        let m = mock();
        assert_eq!(m.label_for("Free tickets"), "spam");
        assert_eq!(m.label_for("see you"), "ham");
    }

    #[test]
    fn answers_every_indexed_line() {
        let request = ChatRequest {
            model: "m".into(),
            messages: vec![
                ChatMessage { role: "system".into(), content: "x".into() },
                ChatMessage { role: "user".into(), content: "3. you win. 2 of them\n4. lunch?".into() },
            ],
            temperature: 0.01,
            top_p: 0.9,
            seed: None,
        };
        let reply = mock().complete(&request).unwrap();
        assert_eq!(reply.content, r#"{"3":"spam","4":"ham"}"#);
    }
}
