mod common;

use std::time::Duration;

use common::{Reply, StubServer};
use zsbench::llm::gateway::{GatewayError, RecordingSleeper};
use zsbench::llm::http::HttpProvider;
use zsbench::llm::{classify_corpus, complete_chat, ClassifyContext, LlmRunConfig};
use zsbench_core::prompt::{build_prompt, PromptBundle, TaskPrompt};
use zsbench_core::{LabelId, LabelSchema};

fn schema() -> LabelSchema {
    LabelSchema::new("SMS spam", ["spam", "ham"]).unwrap()
}

fn bundle() -> PromptBundle {
    build_prompt(&TaskPrompt::sms_spam(), &schema(), &[(1, "WIN a free prize"), (2, "see you at 6")], 25).unwrap()
}

fn config() -> LlmRunConfig {
    LlmRunConfig {
        model: "stub-model".into(),
        temperature: 0.2,
        top_p: 0.8,
        ..LlmRunConfig::default()
    }
}

#[test]
fn rate_limits_are_retried_with_backoff() {
    let server = StubServer::start(vec![
        Reply::status(429, "slow down"),
        Reply::status(429, "slow down"),
        Reply::ok(r#"{"1": "spam", "2": "ham"}"#),
    ]);
    let provider = HttpProvider::new(&server.url, "sk-test", Duration::from_secs(5));
    let sleeper = RecordingSleeper::default();
    let response = complete_chat(&bundle(), &config(), &provider, &sleeper).unwrap();

    assert_eq!(response.retries, 2);
    assert_eq!(response.raw_text, r#"{"1": "spam", "2": "ham"}"#);
    assert_eq!(response.model.as_deref(), Some("stub-model"));
    let sleeps = sleeper.sleeps();
    assert_eq!(sleeps.len(), 2);
    assert!(sleeps[0] >= Duration::from_secs(1) && sleeps[0] <= Duration::from_millis(1250));
    assert!(sleeps[1] >= Duration::from_secs(2) && sleeps[1] <= Duration::from_millis(2500));

    let seen = server.seen();
    assert_eq!(seen.len(), 3);
    let last = &seen[2];
    assert_eq!(last.header("authorization"), Some("Bearer sk-test"));
    assert_eq!(last.body["model"], "stub-model");
    assert_eq!(last.body["temperature"], 0.2);
    assert_eq!(last.body["top_p"], 0.8);
    assert_eq!(last.body["messages"][0]["role"], "system");
    assert!(last.body["messages"][1]["content"].as_str().unwrap().contains("WIN a free prize"));
}

#[test]
fn unauthorized_is_not_retried() {
    let server = StubServer::start(vec![Reply::status(401, r#"{"error": "bad key"}"#)]);
    let provider = HttpProvider::new(&server.url, "sk-wrong", Duration::from_secs(5));
    let sleeper = RecordingSleeper::default();
    let err = complete_chat(&bundle(), &config(), &provider, &sleeper).unwrap_err();
    assert!(matches!(err, GatewayError::Auth(_)), "{err:?}");
    assert_eq!(server.seen().len(), 1);
    assert!(sleeper.sleeps().is_empty());
}

#[test]
fn slow_server_times_out_after_retries() {
    let server = StubServer::start(vec![Reply::ok("{}").delayed(Duration::from_millis(800))]);
    let provider = HttpProvider::new(&server.url, "sk-test", Duration::from_millis(200));
    let config = LlmRunConfig {
        max_retries: 1,
        ..config()
    };
    let err = complete_chat(&bundle(), &config, &provider, &RecordingSleeper::default()).unwrap_err();
    assert_eq!(err, GatewayError::Timeout { attempts: 2 });
}

#[test]
fn missing_key_variable_is_a_credentials_error() {
    let err = HttpProvider::from_env("http://127.0.0.1:9", "ZSBENCH_TEST_KEY_THAT_IS_NEVER_SET", Duration::from_secs(1))
        .unwrap_err();
    assert!(err.is_auth());
    assert!(err.to_string().contains("ZSBENCH_TEST_KEY_THAT_IS_NEVER_SET"));
}

#[test]
fn chatty_reply_over_http_is_classified() {
    let server = StubServer::start(vec![Reply::ok(
        "Sure, here you go:\n{\"1\": \"Spam\", \"2\": \"ham\", \"3\": \"HAM \"}\nLet me know!",
    )]);
    let provider = HttpProvider::new(&server.url, "sk-test", Duration::from_secs(5));
    let docs: Vec<(usize, String)> = ["claim your prize", "lunch?", "running late"]
        .iter()
        .enumerate()
        .map(|(i, t)| (i, t.to_string()))
        .collect();
    let (schema, task, config) = (schema(), TaskPrompt::sms_spam(), config());
    let sleeper = RecordingSleeper::default();
    let ctx = ClassifyContext {
        task: &task,
        schema: &schema,
        config: &config,
        provider: &provider,
        sleeper: &sleeper,
        audit: None,
        predictor: "stub",
        run: 0,
    };
    let classified = classify_corpus(&docs, &ctx).unwrap();
    assert_eq!(classified.predictions, vec![Some(LabelId(0)), Some(LabelId(1)), Some(LabelId(1))]);
    assert_eq!(classified.diagnostics.parse.extraneous_text_stripped, 1);
    assert_eq!(classified.diagnostics.parse.repaired_by_case_fold, 2);
    assert_eq!(classified.diagnostics.requests, 1);
}
