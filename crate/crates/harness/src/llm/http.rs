use std::time::Duration;

use serde_json::Value;

use super::provider::{ChatProvider, ChatRequest, ProviderError, ProviderReply};

/// Client for an OpenAI-compatible `POST /chat/completions` endpoint with
/// bearer-token auth.
pub struct HttpProvider {
    url: String,
    api_key: String,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider").field("url", &self.url).finish_non_exhaustive()
    }
}

impl HttpProvider {
    pub fn new(url: impl Into<String>, api_key: impl Into<String>, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        Self {
            url: url.into(),
            api_key: api_key.into(),
            agent: ureq::Agent::new_with_config(config),
        }
    }

    /// Reads the key from `api_key_env`; an unset or empty variable is a
    /// credentials error.
    pub fn from_env(url: impl Into<String>, api_key_env: &str, timeout: Duration) -> Result<Self, ProviderError> {
        match std::env::var(api_key_env) {
            Ok(key) if !key.trim().is_empty() => Ok(Self::new(url, key.trim(), timeout)),
            _ => Err(ProviderError::Credentials(format!(
                "environment variable {api_key_env} is not set"
            ))),
        }
    }
}

impl ChatProvider for HttpProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ProviderReply, ProviderError> {
        let body = serde_json::to_vec(request).map_err(|e| ProviderError::Transport(e.to_string()))?;
        let response = self
            .agent
            .post(&self.url)
            .header("Authorization", format!("Bearer {}", self.api_key))
            .content_type("application/json")
            .send(&body[..])
            .map_err(map_ureq_error)?;
        let status = response.status().as_u16();
        let raw_body = response.into_body().read_to_vec().map_err(map_ureq_error)?;
        if !(200..300).contains(&status) {
            return Err(ProviderError::Status {
                status,
                body: String::from_utf8_lossy(&raw_body).chars().take(500).collect(),
            });
        }
        parse_completion(raw_body)
    }
}

fn map_ureq_error(e: ureq::Error) -> ProviderError {
    match e {
        ureq::Error::Timeout(_) => ProviderError::Timeout,
        other => ProviderError::Transport(other.to_string()),
    }
}

/// Pulls `choices[0].message.content` and usage counters out of a chat
/// completion body.
pub fn parse_completion(raw_body: Vec<u8>) -> Result<ProviderReply, ProviderError> {
    let protocol = |message: String, raw_body: Vec<u8>| ProviderError::Protocol { message, raw_body };
    let value: Value = match serde_json::from_slice(&raw_body) {
        Ok(v) => v,
        Err(e) => return Err(protocol(format!("body is not JSON: {e}"), raw_body)),
    };
    let Some(content) = value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
    else {
        return Err(protocol("no choices[0].message.content".into(), raw_body));
    };
    let usage = |key: &str| value.pointer(&format!("/usage/{key}")).and_then(Value::as_u64);
    Ok(ProviderReply {
        model: value.get("model").and_then(Value::as_str).map(str::to_owned),
        prompt_tokens: usage("prompt_tokens"),
        completion_tokens: usage("completion_tokens"),
        content,
        raw_body,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn completion_body_is_unpacked() {
        let body = br#"{"model":"m-1","choices":[{"message":{"role":"assistant","content":"{\"1\":\"ham\"}"}}],"usage":{"prompt_tokens":12,"completion_tokens":5}}"#;
        let reply = parse_completion(body.to_vec()).unwrap();
        assert_eq!(reply.content, r#"{"1":"ham"}"#);
        assert_eq!(reply.model.as_deref(), Some("m-1"));
        assert_eq!((reply.prompt_tokens, reply.completion_tokens), (Some(12), Some(5)));
        assert_eq!(reply.raw_body, body);
    }

    #[test]
    fn malformed_bodies_keep_their_bytes() {
        let err = parse_completion(vec![0xff, 0xfe]).unwrap_err();
        assert!(matches!(err, ProviderError::Protocol { ref raw_body, .. } if raw_body == &[0xff, 0xfe]));
        assert!(parse_completion(br#"{"choices":[]}"#.to_vec()).is_err());
    }

    #[test]
    fn missing_key_variable() {
        let err = HttpProvider::from_env("http://127.0.0.1:9", "ZSBENCH_TEST_UNSET_KEY", Duration::from_secs(1)).unwrap_err();
        assert!(err.is_auth());
    }
}
