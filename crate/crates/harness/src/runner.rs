//! Running a whole experiment and writing its run directory.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use chrono::{SecondsFormat, Utc};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use zsbench_core::baselines::BaselineSpec;
use zsbench_core::dataset::stratified_split;
use zsbench_core::features::{FeatureError, FeatureVector, Vectorizer};
use zsbench_core::metrics::{aggregate_runs, evaluate, EvalReport, RunAggregate};
use zsbench_core::preprocess::{clean_for_prompt, preprocess_corpus};
use zsbench_core::{LabelId, LabelSchema, LabeledCorpus};

use crate::config::{ExperimentConfig, LlmPredictorConfig, PredictorConfig, ProviderConfig, TextVariant};
use crate::dataset::load_corpus;
use crate::llm::audit::AuditLog;
use crate::llm::gateway::{GatewayDiagnostics, Sleeper, ThreadSleeper};
use crate::llm::http::HttpProvider;
use crate::llm::{classify_corpus, ChatProvider, ClassifyContext};
use crate::report::{write_reports, ReportFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    TraditionalMl,
    Llm,
}

/// One evaluated prediction set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub report: EvalReport,
    /// Predicted label per test document, aligned with `test_ids`; `null`
    /// marks an invalid prediction.
    pub predictions: Vec<Option<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gateway: Option<GatewayDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum PredictorOutcome {
    Ok {
        runs: Vec<RunRecord>,
        /// ACC, F1 and MCC across runs; filled for repeated predictors.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        aggregates: Vec<RunAggregate>,
    },
    Failed {
        error: String,
        /// Runs that finished before the failure.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        completed_runs: Vec<RunRecord>,
        /// Predictions of the failing run that did come back.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        partial_predictions: Option<Vec<Option<String>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorResult {
    /// Row label, e.g. `MNB` or `GPT-4 (clean)`.
    pub name: String,
    pub category: Category,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<TextVariant>,
    pub outcome: PredictorOutcome,
}

impl PredictorResult {
    /// The report shown for single-run predictors.
    pub fn report(&self) -> Option<&EvalReport> {
        match &self.outcome {
            PredictorOutcome::Ok { runs, .. } => runs.first().map(|r| &r.report),
            PredictorOutcome::Failed { .. } => None,
        }
    }

    pub fn aggregate(&self, metric: &str) -> Option<&RunAggregate> {
        match &self.outcome {
            PredictorOutcome::Ok { aggregates, .. } => aggregates.iter().find(|a| a.metric == metric),
            PredictorOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub labels: Vec<String>,
    pub train_size: usize,
    pub test_ids: Vec<usize>,
    pub test_distribution: Vec<(String, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocabulary_size: Option<usize>,
    /// Train and test documents left without tokens by preprocessing.
    pub emptied_documents: usize,
    pub predictors: Vec<PredictorResult>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub dataset_path: PathBuf,
    pub dataset_sha256: String,
    pub started_at: String,
    pub finished_at: String,
    pub files: Vec<String>,
}

pub struct RunOptions {
    /// Relative dataset and output paths resolve against this directory.
    pub base_dir: PathBuf,
    pub sleeper: Arc<dyn Sleeper>,
}

impl RunOptions {
    pub fn new(base_dir: impl Into<PathBuf>) -> Self {
        Self {
            base_dir: base_dir.into(),
            sleeper: Arc::new(ThreadSleeper),
        }
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub run_dir: PathBuf,
    pub result: ExperimentResult,
}

pub const CONFIG_FILE: &str = "config.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESULT_FILE: &str = "result.json";

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars().flat_map(char::to_lowercase) {
        if c.is_ascii_alphanumeric() {
            out.push(c);
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    let trimmed = out.trim_matches('-');
    if trimmed.is_empty() { "run".into() } else { trimmed.into() }
}

fn create_run_dir(output_dir: &Path, name: &str) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(output_dir).with_context(|| format!("creating {}", output_dir.display()))?;
    let stamp = Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
    let base = format!("{}-{stamp}", slug(name));
    for n in 0.. {
        let candidate = match n {
            0 => output_dir.join(&base),
            n => output_dir.join(format!("{base}-{n}")),
        };
        match fs::create_dir(&candidate) {
            Ok(()) => return Ok(candidate),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e).with_context(|| format!("creating {}", candidate.display())),
        }
    }
    unreachable!()
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Loads and splits the dataset, runs every predictor on the shared test set
/// and writes the run directory. Dataset problems abort; predictor problems
/// are recorded per predictor.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> anyhow::Result<RunOutput> {
    let started_at = Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true);
    let schema = config.schema();
    let dataset_path = options.base_dir.join(&config.dataset.path);
    let dataset_bytes = fs::read(&dataset_path).with_context(|| format!("reading {}", dataset_path.display()))?;
    let corpus = load_corpus(
        &dataset_path,
        config.dataset.format,
        &config.dataset.text_field,
        &config.dataset.label_field,
        &schema,
    )?;
    let (train, test) = stratified_split(&corpus, config.split.test_size, config.split.seed)
        .with_context(|| format!("splitting {}", dataset_path.display()))?;
    info!("{}: {} train / {} test documents", config.name, train.len(), test.len());

    let run_dir = create_run_dir(&options.base_dir.join(&config.output_dir), &config.name)?;
    let config_json = serde_json::to_string_pretty(config)?;
    fs::write(run_dir.join(CONFIG_FILE), format!("{config_json}\n"))?;
    fs::create_dir_all(run_dir.join("audit"))?;

    let truth = test.gold_labels()?;
    let train_docs = preprocess_corpus(&train, &config.cleaning);
    let test_docs = preprocess_corpus(&test, &config.cleaning);
    let features = Vectorizer::fit(&train_docs.documents, config.features).map(|v| {
        let x_train = v.transform_all(&train_docs.documents);
        let x_test = v.transform_all(&test_docs.documents);
        (v, x_train, x_test)
    });
    let baseline_data = BaselineData {
        features: &features,
        train_labels: train.gold_labels()?,
        truth: &truth,
        schema: &schema,
    };

    let mut predictors = Vec::new();
    for predictor in &config.predictors {
        match predictor {
            PredictorConfig::Baseline { spec, .. } => {
                let name = predictor.display_name();
                info!("training {name}");
                let outcome = isolate(|| run_baseline(spec, &baseline_data));
                predictors.push(PredictorResult {
                    name,
                    category: Category::TraditionalMl,
                    input: None,
                    outcome,
                });
            }
            PredictorConfig::Llm(llm) => {
                for &variant in &llm.inputs {
                    let name = if llm.inputs.len() > 1 || variant != TextVariant::Original {
                        format!("{} ({})", llm.name, variant.as_str())
                    } else {
                        llm.name.clone()
                    };
                    info!("querying {name}");
                    let audit_path = run_dir.join("audit").join(format!("{}.jsonl", slug(&name)));
                    let outcome = isolate(|| {
                        run_llm(llm, variant, &name, config, &test, &truth, &schema, &audit_path, options)
                    });
                    predictors.push(PredictorResult {
                        name,
                        category: Category::Llm,
                        input: Some(variant),
                        outcome,
                    });
                }
            }
        }
    }
    for p in &predictors {
        if let PredictorOutcome::Failed { error, .. } = &p.outcome {
            warn!("{} failed: {error}", p.name);
        }
    }

    let result = ExperimentResult {
        name: config.name.clone(),
        labels: schema.labels().to_vec(),
        train_size: train.len(),
        test_ids: test.ids(),
        test_distribution: test.class_distribution(),
        vocabulary_size: features.as_ref().ok().map(|(v, _, _)| v.dim()),
        emptied_documents: train_docs.emptied + test_docs.emptied,
        predictors,
    };
    write_json(&run_dir.join(RESULT_FILE), &result)?;
    write_reports(&run_dir, &result, &[ReportFormat::Markdown, ReportFormat::Json])?;

    let mut files: Vec<String> = Vec::new();
    collect_files(&run_dir, &run_dir, &mut files)?;
    files.push(MANIFEST_FILE.into());
    files.sort();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: sha256_hex(config_json.as_bytes()),
        dataset_path,
        dataset_sha256: sha256_hex(&dataset_bytes),
        started_at,
        finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        files,
    };
    write_json(&run_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(RunOutput { run_dir, result })
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> anyhow::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if let Ok(rel) = path.strip_prefix(root) {
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

fn isolate(f: impl FnOnce() -> PredictorOutcome) -> PredictorOutcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|panic| {
        let message = panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "unknown panic".into());
        PredictorOutcome::Failed {
            error: format!("panicked: {message}"),
            completed_runs: Vec::new(),
            partial_predictions: None,
        }
    })
}

fn failed(error: impl std::fmt::Display) -> PredictorOutcome {
    PredictorOutcome::Failed {
        error: error.to_string(),
        completed_runs: Vec::new(),
        partial_predictions: None,
    }
}

fn label_names(pred: &[Option<LabelId>], schema: &LabelSchema) -> Vec<Option<String>> {
    pred.iter().map(|p| p.map(|l| schema.name(l).to_string())).collect()
}

type Features = Result<(Vectorizer, Vec<FeatureVector>, Vec<FeatureVector>), FeatureError>;

struct BaselineData<'a> {
    features: &'a Features,
    train_labels: Vec<LabelId>,
    truth: &'a [LabelId],
    schema: &'a LabelSchema,
}

fn run_baseline(spec: &BaselineSpec, data: &BaselineData<'_>) -> PredictorOutcome {
    let (_, x_train, x_test) = match data.features {
        Ok(f) => f,
        Err(e) => return failed(format!("feature extraction: {e}")),
    };
    let model = match spec.train(x_train, &data.train_labels, data.schema.len()) {
        Ok(m) => m,
        Err(e) => return failed(format!("training: {e}")),
    };
    let mut labels = Vec::with_capacity(x_test.len());
    let mut scores = Vec::with_capacity(x_test.len());
    for (i, x) in x_test.iter().enumerate() {
        match model.predict_scores(i, x) {
            Ok(p) => {
                labels.push(Some(p.label));
                scores.push(p.scores);
            }
            Err(e) => return failed(format!("prediction: {e}")),
        }
    }
    match evaluate(data.truth, &labels, Some(&scores), data.schema) {
        Ok(report) => PredictorOutcome::Ok {
            runs: vec![RunRecord {
                report,
                predictions: label_names(&labels, data.schema),
                gateway: None,
            }],
            aggregates: Vec::new(),
        },
        Err(e) => failed(format!("evaluation: {e}")),
    }
}

fn build_provider(llm: &LlmPredictorConfig) -> Result<Box<dyn ChatProvider>, String> {
    match &llm.provider {
        ProviderConfig::Http { url, api_key_env } => {
            let timeout = Duration::from_secs(llm.settings.timeout_secs);
            HttpProvider::from_env(url.clone(), api_key_env, timeout)
                .map(|p| Box::new(p) as Box<dyn ChatProvider>)
                .map_err(|e| format!("authentication failed: {e}"))
        }
        ProviderConfig::KeywordMock(mock) => Ok(Box::new(mock.clone())),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_llm(
    llm: &LlmPredictorConfig,
    variant: TextVariant,
    name: &str,
    config: &ExperimentConfig,
    test: &LabeledCorpus,
    truth: &[LabelId],
    schema: &LabelSchema,
    audit_path: &Path,
    options: &RunOptions,
) -> PredictorOutcome {
    let provider = match build_provider(llm) {
        Ok(p) => p,
        Err(e) => return failed(e),
    };
    let audit = match AuditLog::create(audit_path) {
        Ok(a) => a,
        Err(e) => return failed(format!("opening audit log: {e}")),
    };
    let task = config.task_prompt();
    let docs: Vec<(usize, String)> = test
        .documents()
        .iter()
        .map(|d| {
            let text = match variant {
                TextVariant::Original => d.text.clone(),
                TextVariant::Clean => clean_for_prompt(&d.text, &llm.clean_policy),
            };
            (d.id, text)
        })
        .collect();

    let repeats = llm.repeats(config.repeat_count);
    let mut runs = Vec::with_capacity(repeats);
    for run in 0..repeats {
        let ctx = ClassifyContext {
            task: &task,
            schema,
            config: &llm.settings,
            provider: provider.as_ref(),
            sleeper: options.sleeper.as_ref(),
            audit: Some(&audit),
            predictor: name,
            run,
        };
        let classified = match classify_corpus(&docs, &ctx) {
            Ok(c) => c,
            Err(failure) => {
                return PredictorOutcome::Failed {
                    error: format!("run {run}: {failure}"),
                    completed_runs: runs,
                    partial_predictions: Some(label_names(&failure.partial.predictions, schema)),
                }
            }
        };
        match evaluate(truth, &classified.predictions, None, schema) {
            Ok(report) => runs.push(RunRecord {
                report,
                predictions: label_names(&classified.predictions, schema),
                gateway: Some(classified.diagnostics),
            }),
            Err(e) => return failed(format!("evaluation: {e}")),
        }
    }
    let aggregates = if runs.len() > 1 {
        let metric = |name: &str, f: fn(&EvalReport) -> f64| {
            let values: Vec<f64> = runs.iter().map(|r| f(&r.report)).collect();
            aggregate_runs(name, &values)
        };
        match [
            metric("accuracy", |r| r.accuracy),
            metric("macro_f1", |r| r.macro_f1),
            metric("mcc", |r| r.mcc),
        ]
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        {
            Ok(a) => a,
            Err(e) => return failed(format!("aggregation: {e}")),
        }
    } else {
        Vec::new()
    };
    PredictorOutcome::Ok { runs, aggregates }
}

/// Reads `result.json` from a run directory.
pub fn load_result(run_dir: &Path) -> anyhow::Result<ExperimentResult> {
    let path = run_dir.join(RESULT_FILE);
    if !path.exists() {
        bail!("{} does not contain {RESULT_FILE}", run_dir.display());
    }
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("GPT-4 (clean)"), "gpt-4-clean");
        assert_eq!(slug("  "), "run");
        assert_eq!(slug("Mock LLM"), "mock-llm");
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
