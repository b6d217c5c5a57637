//! Experiment configuration: one JSON document per experiment.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use zsbench_core::baselines::BaselineSpec;
use zsbench_core::features::VectorizerParams;
use zsbench_core::preprocess::CleaningPolicy;
use zsbench_core::prompt::TaskPrompt;
use zsbench_core::LabelSchema;

use crate::dataset::Format;
use crate::llm::mock::KeywordMock;
use crate::llm::LlmRunConfig;

/// Config keys that would carry a secret.
const SECRET_KEYS: [&str; 4] = ["api_key", "apikey", "authorization", "bearer_token"];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}")]
    Syntax(#[from] serde_json::Error),
    #[error("{location}: {message}")]
    Invalid { location: String, message: String },
}

fn invalid(location: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        location: location.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub cleaning: CleaningPolicy,
    #[serde(default)]
    pub features: VectorizerParams,
    #[serde(default)]
    pub prompt: Option<PromptSpec>,
    pub predictors: Vec<PredictorConfig>,
    #[serde(default = "default_repeat")]
    pub repeat_count: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_repeat() -> usize {
    5
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub format: Format,
    #[serde(default = "default_text_field")]
    pub text_field: String,
    #[serde(default = "default_label_field")]
    pub label_field: String,
    pub task_name: String,
    pub labels: Vec<String>,
}

fn default_text_field() -> String {
    "text".into()
}

fn default_label_field() -> String {
    "label".into()
}

impl DatasetConfig {
    pub fn schema(&self) -> Result<LabelSchema, ConfigError> {
        LabelSchema::new(self.task_name.clone(), self.labels.iter().cloned())
            .map_err(|e| invalid("dataset.labels", e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_size: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_size: 150,
            seed: 0,
        }
    }
}

/// A named wording preset or explicit prompt wording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PromptSpec {
    Preset(String),
    Custom(TaskPrompt),
}

impl PromptSpec {
    pub const PRESETS: [&'static str; 3] = ["ecommerce", "tweet_sentiment", "sms_spam"];

    pub fn resolve(spec: Option<&PromptSpec>, schema: &LabelSchema) -> Result<TaskPrompt, ConfigError> {
        Ok(match spec {
            None => TaskPrompt {
                task_name: schema.task_name().to_string(),
                item: "text".into(),
                items: "texts".into(),
                source: "the dataset".into(),
                example_label: None,
            },
            Some(PromptSpec::Custom(p)) => p.clone(),
            Some(PromptSpec::Preset(name)) => match name.as_str() {
                "ecommerce" => TaskPrompt::ecommerce(),
                "tweet_sentiment" => TaskPrompt::tweet_sentiment(),
                "sms_spam" => TaskPrompt::sms_spam(),
                other => {
                    return Err(invalid(
                        "prompt",
                        format!("unknown prompt preset {other:?} (expected one of {})", Self::PRESETS.join(", ")),
                    ))
                }
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictorConfig {
    Baseline { name: Option<String>, spec: BaselineSpec },
    Llm(LlmPredictorConfig),
}

impl PredictorConfig {
    pub fn display_name(&self) -> String {
        match self {
            PredictorConfig::Baseline { name: Some(n), .. } => n.clone(),
            PredictorConfig::Baseline { spec, .. } => spec.display_name().to_string(),
            PredictorConfig::Llm(llm) => llm.name.clone(),
        }
    }
}

pub const LLM_KIND: &str = "llm";

impl<'de> Deserialize<'de> for PredictorConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let mut value = Value::deserialize(d)?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| D::Error::custom("predictor must be an object"))?;
        let kind = match obj.get("kind") {
            Some(Value::String(k)) => k.trim().to_lowercase(),
            Some(_) => return Err(D::Error::custom("predictor kind must be a string")),
            None => return Err(D::Error::custom("predictor is missing \"kind\"")),
        };
        obj.insert("kind".into(), Value::String(kind.clone()));
        if kind == LLM_KIND {
            return LlmPredictorConfig::deserialize(value)
                .map(PredictorConfig::Llm)
                .map_err(D::Error::custom);
        }
        if !BaselineSpec::KINDS.contains(&kind.as_str()) {
            return Err(D::Error::custom(format!(
                "unknown predictor {kind:?} (expected one of {}, {LLM_KIND})",
                BaselineSpec::KINDS.join(", ")
            )));
        }
        let name = match obj.remove("name") {
            None => None,
            Some(Value::String(n)) => Some(n),
            Some(_) => return Err(D::Error::custom("predictor name must be a string")),
        };
        let spec = BaselineSpec::deserialize(value).map_err(D::Error::custom)?;
        Ok(PredictorConfig::Baseline { name, spec })
    }
}

impl Serialize for PredictorConfig {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            PredictorConfig::Llm(llm) => llm.serialize(s),
            PredictorConfig::Baseline { name, spec } => {
                let mut value = serde_json::to_value(spec).map_err(serde::ser::Error::custom)?;
                if let (Some(name), Some(obj)) = (name, value.as_object_mut()) {
                    obj.insert("name".into(), Value::String(name.clone()));
                }
                value.serialize(s)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextVariant {
    /// Raw document text.
    Original,
    /// Text passed through the predictor's cleaning policy first.
    Clean,
}

impl TextVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            TextVariant::Original => "original",
            TextVariant::Clean => "clean",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmPredictorConfig {
    pub kind: String,
    pub name: String,
    pub provider: ProviderConfig,
    pub settings: LlmRunConfig,
    #[serde(default = "default_inputs")]
    pub inputs: Vec<TextVariant>,
    /// Policy for the `clean` input; stemming is off by default so the model
    /// still sees words.
    #[serde(default = "CleaningPolicy::tweet")]
    pub clean_policy: CleaningPolicy,
    /// Overrides the experiment-wide repeat count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat_count: Option<usize>,
}

fn default_inputs() -> Vec<TextVariant> {
    vec![TextVariant::Original]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderConfig {
    /// OpenAI-compatible chat completions endpoint.
    Http {
        url: String,
        #[serde(default = "default_key_env")]
        api_key_env: String,
    },
    KeywordMock(KeywordMock),
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}

/// Parses and checks a config document, filling in every default.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig, ConfigError> {
    let value: Value = serde_json::from_str(raw)?;
    if let Some(location) = find_secret(&value, String::new()) {
        return Err(invalid(
            location,
            "API keys are never read from config files; name an environment variable with api_key_env",
        ));
    }
    let config: ExperimentConfig = serde_json::from_str(raw)?;
    config.check()?;
    Ok(config)
}

fn find_secret(value: &Value, path: String) -> Option<String> {
    match value {
        Value::Object(map) => map.iter().find_map(|(k, v)| {
            let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
            if SECRET_KEYS.contains(&k.to_lowercase().as_str()) {
                Some(here)
            } else {
                find_secret(v, here)
            }
        }),
        Value::Array(items) => items
            .iter()
            .enumerate()
            .find_map(|(i, v)| find_secret(v, format!("{path}[{i}]"))),
        _ => None,
    }
}

impl ExperimentConfig {
    fn check(&self) -> Result<(), ConfigError> {
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        if self.dataset.path.as_os_str().is_empty() {
            return Err(invalid("dataset.path", "missing dataset path"));
        }
        let schema = self.dataset.schema()?;
        let task = PromptSpec::resolve(self.prompt.as_ref(), &schema)?;
        task.instruction(&schema).map_err(|e| invalid("prompt", e.to_string()))?;
        if self.split.test_size == 0 {
            return Err(invalid("split.test_size", "must be at least 1"));
        }
        if self.features.min_df == 0 || self.features.ngram_max == 0 {
            return Err(invalid("features", "min_df and ngram_max must be at least 1"));
        }
        if self.repeat_count == 0 {
            return Err(invalid("repeat_count", "must be at least 1"));
        }
        if self.predictors.is_empty() {
            return Err(invalid("predictors", "at least one predictor is required"));
        }
        let mut names = BTreeSet::new();
        for (i, p) in self.predictors.iter().enumerate() {
            let at = format!("predictors[{i}]");
            if !names.insert(p.display_name()) {
                return Err(invalid(
                    at,
                    format!("duplicate predictor name {:?}; set \"name\" to tell them apart", p.display_name()),
                ));
            }
            if let PredictorConfig::Llm(llm) = p {
                llm.check(&schema).map_err(|m| invalid(at, m))?;
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> LabelSchema {
        self.dataset.schema().expect("validated config")
    }

    pub fn task_prompt(&self) -> TaskPrompt {
        PromptSpec::resolve(self.prompt.as_ref(), &self.schema()).expect("validated config")
    }
}

impl LlmPredictorConfig {
    pub fn repeats(&self, experiment_default: usize) -> usize {
        self.repeat_count.unwrap_or(experiment_default)
    }

    fn check(&self, schema: &LabelSchema) -> Result<(), String> {
        if self.name.trim().is_empty() {
            return Err("name must not be empty".into());
        }
        self.settings.validate()?;
        if self.repeat_count == Some(0) {
            return Err("repeat_count must be at least 1".into());
        }
        if self.inputs.is_empty() {
            return Err("inputs must name at least one of original, clean".into());
        }
        if self.inputs.iter().collect::<BTreeSet<_>>().len() != self.inputs.len() {
            return Err("inputs contains a duplicate".into());
        }
        match &self.provider {
            ProviderConfig::Http { url, api_key_env } => {
                if !(url.starts_with("http://") || url.starts_with("https://")) {
                    return Err(format!("provider.url must be an http(s) URL, got {url:?}"));
                }
                if api_key_env.trim().is_empty() {
                    return Err("provider.api_key_env must not be empty".into());
                }
            }
            ProviderConfig::KeywordMock(mock) => {
                if let Some(bad) = mock.labels().find(|l| schema.lookup_exact(l).is_none()) {
                    return Err(format!(
                        "label mismatch: mock label {bad:?} is not in the dataset labels ({})",
                        schema.labels().join(", ")
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "min",
        "dataset": {"path": "data.csv", "format": "csv", "task_name": "SMS spam", "labels": ["spam", "ham"]},
        "predictors": [{"kind": "mnb"}]
    }"#;

    fn with_predictors(predictors: &str) -> String {
        MINIMAL.replace(r#"[{"kind": "mnb"}]"#, predictors)
    }

    const MOCK: &str = r#"{"kind": "llm", "name": "mock", "settings": {"model": "m"},
        "provider": {"type": "keyword_mock", "rules": [{"keyword": "free", "label": "spam"}], "fallback": "ham"}}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = validate_config(MINIMAL).unwrap();
        assert_eq!(c.split.test_size, 150);
        assert_eq!(c.repeat_count, 5);
        assert_eq!(c.features.min_df, 2);
        assert_eq!(c.cleaning, CleaningPolicy::full());
        assert_eq!(c.predictors[0].display_name(), "MNB");
    }

    #[test]
    fn llm_defaults_follow_the_protocol() {
        let c = validate_config(&with_predictors(&format!("[{MOCK}]"))).unwrap();
        let PredictorConfig::Llm(llm) = &c.predictors[0] else { panic!() };
        assert_eq!(llm.settings.temperature, 0.01);
        assert_eq!(llm.settings.top_p, 0.9);
        assert_eq!(llm.settings.batch_size, 25);
        assert_eq!(llm.inputs, [TextVariant::Original]);
        assert_eq!(llm.repeats(c.repeat_count), 5);
    }

    #[test]
    fn unknown_predictor_is_rejected() {
        let err = validate_config(&with_predictors(r#"[{"kind": "SVM"}]"#)).unwrap_err();
        assert!(err.to_string().contains("unknown predictor \"svm\""), "{err}");
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn kinds_are_case_insensitive_and_aliases_work() {
        let c = validate_config(&with_predictors(r#"[{"kind": "LG"}, {"kind": "rf", "n_trees": 3}]"#)).unwrap();
        assert_eq!(c.predictors[0].display_name(), "LR");
        assert!(matches!(&c.predictors[1], PredictorConfig::Baseline { spec: BaselineSpec::Rf(p), .. } if p.n_trees == 3));
    }

    #[test]
    fn api_keys_in_config_are_refused() {
        let p = r#"[{"kind": "llm", "name": "x", "settings": {"model": "m"},
            "provider": {"type": "http", "url": "https://x/v1/chat/completions", "api_key": "sk-123"}}]"#;
        let err = validate_config(&with_predictors(p)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("predictors[0].provider.api_key:"), "{msg}");
        assert!(!msg.contains("sk-123"));
    }

    #[test]
    fn mock_labels_must_be_in_schema() {
        let bad = MOCK.replace(r#""fallback": "ham""#, r#""fallback": "eggs""#);
        let err = validate_config(&with_predictors(&format!("[{bad}]"))).unwrap_err();
        assert!(err.to_string().contains("label mismatch"), "{err}");
    }

    #[test]
    fn structural_errors_are_located() {
        let err = validate_config(&MINIMAL.replace(r#""path": "data.csv", "#, "")).unwrap_err();
        assert!(err.to_string().contains("missing field `path`"), "{err}");
        let err = validate_config(&with_predictors("[]")).unwrap_err();
        assert!(err.to_string().starts_with("predictors:"), "{err}");
        let err = validate_config(&with_predictors(r#"[{"kind": "mnb"}, {"kind": "mnb"}]"#)).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        let err = validate_config(&with_predictors(r#"[{"kind": "knn", "k": 5, "q": 1}]"#)).unwrap_err();
        assert!(err.to_string().contains("unknown field"), "{err}");
        let err = validate_config(&MINIMAL.replace(r#"["spam", "ham"]"#, r#"["spam", "Spam"]"#)).unwrap_err();
        assert!(err.to_string().starts_with("dataset.labels"), "{err}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let raw = with_predictors(&format!(r#"[{{"kind": "rf", "name": "RF-small", "n_trees": 5}}, {MOCK}]"#));
        let c = validate_config(&raw).unwrap();
        let again = validate_config(&serde_json::to_string_pretty(&c).unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn prompt_presets() {
        let c = validate_config(&MINIMAL.replace(r#""predictors""#, r#""prompt": "sms_spam", "predictors""#)).unwrap();
        assert_eq!(c.task_prompt(), TaskPrompt::sms_spam());
        assert!(validate_config(&MINIMAL.replace(r#""predictors""#, r#""prompt": "nope", "predictors""#)).is_err());
    }
}
