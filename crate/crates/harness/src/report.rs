//! Comparison tables in markdown and JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;

use crate::runner::{Category, ExperimentResult, PredictorOutcome, PredictorResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    #[value(name = "md", alias = "markdown")]
    Markdown,
    Json,
}

impl ReportFormat {
    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "report.md",
            ReportFormat::Json => "report.json",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("result has no predictors; refusing to write an empty report")]
    Empty,
    #[error("writing {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub fn emit_report(result: &ExperimentResult, format: ReportFormat) -> Result<String, ReportError> {
    if result.predictors.is_empty() {
        return Err(ReportError::Empty);
    }
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(result)? + "\n"),
        ReportFormat::Markdown => Ok(markdown(result)),
    }
}

pub fn write_reports(run_dir: &Path, result: &ExperimentResult, formats: &[ReportFormat]) -> Result<Vec<PathBuf>, ReportError> {
    let mut written = Vec::new();
    for &format in formats {
        let text = emit_report(result, format)?;
        let path = run_dir.join(format.file_name());
        fs::write(&path, text).map_err(|source| ReportError::Write {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

/// `mean±std` for repeated predictors, the single value otherwise.
fn cell(p: &PredictorResult, metric: &str, single: impl Fn(&zsbench_core::EvalReport) -> Option<f64>) -> String {
    if let Some(agg) = p.aggregate(metric) {
        return agg.display();
    }
    match p.report().and_then(single) {
        Some(v) => format!("{v:.4}"),
        None => "-".into(),
    }
}

fn markdown(result: &ExperimentResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {}\n", result.name);
    let composition: Vec<String> = result
        .test_distribution
        .iter()
        .map(|(label, n)| format!("{label} {n}"))
        .collect();
    let _ = writeln!(
        out,
        "Test set: {} documents ({}). Training set: {} documents.\n",
        result.test_ids.len(),
        composition.join(", "),
        result.train_size
    );
    out.push_str("| Model | ACC | F1 | AUC |\n|---|---|---|---|\n");
    for (category, title) in [(Category::TraditionalMl, "Traditional ML"), (Category::Llm, "LLM")] {
        let rows: Vec<&PredictorResult> = result.predictors.iter().filter(|p| p.category == category).collect();
        if rows.is_empty() {
            continue;
        }
        let _ = writeln!(out, "| **{title}** | | | |");
        for p in rows {
            if let PredictorOutcome::Failed { .. } = p.outcome {
                let _ = writeln!(out, "| {} | failed | - | - |", p.name);
                continue;
            }
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} |",
                p.name,
                cell(p, "accuracy", |r| Some(r.accuracy)),
                cell(p, "macro_f1", |r| Some(r.macro_f1)),
                cell(p, "auc", |r| r.auc),
            );
        }
    }

    let failures: Vec<(&str, &str)> = result
        .predictors
        .iter()
        .filter_map(|p| match &p.outcome {
            PredictorOutcome::Failed { error, .. } => Some((p.name.as_str(), error.as_str())),
            PredictorOutcome::Ok { .. } => None,
        })
        .collect();
    if !failures.is_empty() {
        out.push_str("\n## Failures\n\n");
        for (name, error) in failures {
            let _ = writeln!(out, "- {name}: {error}");
        }
    }

    let mut invalid = String::new();
    for p in &result.predictors {
        if let PredictorOutcome::Ok { runs, .. } = &p.outcome {
            let counts: Vec<String> = runs.iter().map(|r| r.report.n_invalid_predictions.to_string()).collect();
            if p.category == Category::Llm {
                let _ = writeln!(invalid, "| {} | {} |", p.name, counts.join(", "));
            }
        }
    }
    if !invalid.is_empty() {
        out.push_str("\n## Invalid LLM predictions per run\n\n| Model | Invalid |\n|---|---|\n");
        out.push_str(&invalid);
    }
    out
}
