//! The zero-shot classification prompt.
//!
//! One instruction template serves every task; only the task wording and the
//! label list change. The documents of a batch go into a separate user
//! message as an indexed list, one `index. text` line per document.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::LabelSchema;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("batch of {len} exceeds the configured batch size {max}")]
    BatchTooLarge { len: usize, max: usize },
    #[error("document at batch index {0} has empty text")]
    EmptyText(u32),
    #[error("batch index {0} appears twice")]
    DuplicateIndex(u32),
    #[error("example label {0:?} is not in the schema")]
    UnknownExampleLabel(String),
}

/// Task wording substituted into the instruction template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskPrompt {
    /// What is being classified, e.g. "e-commerce products".
    pub task_name: String,
    /// One item, e.g. "product".
    pub item: String,
    /// Several items, e.g. "products".
    pub items: String,
    /// Where the items come from, e.g. "the e-commerce website".
    pub source: String,
    /// Label used in the `{1: ...}` format example; defaults to the first
    /// schema label.
    #[serde(default)]
    pub example_label: Option<String>,
}

impl TaskPrompt {
    pub fn ecommerce() -> Self {
        Self {
            task_name: "e-commerce products".into(),
            item: "product".into(),
            items: "products".into(),
            source: "the e-commerce website".into(),
            example_label: None,
        }
    }

    pub fn tweet_sentiment() -> Self {
        Self {
            task_name: "tweet sentiment".into(),
            item: "tweet".into(),
            items: "tweets".into(),
            source: "the social media platform".into(),
            example_label: None,
        }
    }

    pub fn sms_spam() -> Self {
        Self {
            task_name: "SMS spam".into(),
            item: "message".into(),
            items: "messages".into(),
            source: "the SMS inbox".into(),
            example_label: None,
        }
    }

    pub fn instruction(&self, schema: &LabelSchema) -> Result<String, PromptError> {
        let example = match &self.example_label {
            Some(label) => {
                if schema.lookup_exact(label).is_none() {
                    return Err(PromptError::UnknownExampleLabel(label.clone()));
                }
                label.as_str()
            }
            None => &schema.labels()[0],
        };
        let n = schema.len();
        Ok(format!(
            "You are an AI assistant and you are very good at doing {task} classification. \
             You are going to help a customer to classify the {items} in {source}. \
             You are only allowed to choose one of the following {n} categories: {labels}. \
             Please provide only one category for each {item} in JSON format where the key is \
             the index for each {item} and the value is one of the {n} categories. \
             For example: {{1: {example}}}. \
             Please do not repeat or return the content back again, just provide the category \
             in the defined format.",
            task = self.task_name,
            items = self.items,
            source = self.source,
            item = self.item,
            labels = schema.labels().join(", "),
        ))
    }
}

/// What gets sent for one batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_instruction: String,
    pub user_payload: String,
    pub batch_indices: Vec<u32>,
}

/// Line breaks inside a document would break the one-line-per-item layout.
fn single_line(text: &str) -> String {
    text.split(['\r', '\n']).filter(|s| !s.is_empty()).collect::<Vec<_>>().join(" ")
}

pub fn build_prompt(
    task: &TaskPrompt,
    schema: &LabelSchema,
    batch: &[(u32, &str)],
    max_batch: usize,
) -> Result<PromptBundle, PromptError> {
    if batch.is_empty() {
        return Err(PromptError::EmptyBatch);
    }
    if batch.len() > max_batch {
        return Err(PromptError::BatchTooLarge {
            len: batch.len(),
            max: max_batch,
        });
    }
    let mut batch_indices = Vec::with_capacity(batch.len());
    let mut lines = Vec::with_capacity(batch.len());
    for &(index, text) in batch {
        if text.trim().is_empty() {
            return Err(PromptError::EmptyText(index));
        }
        if batch_indices.contains(&index) {
            return Err(PromptError::DuplicateIndex(index));
        }
        batch_indices.push(index);
        lines.push(format!("{index}. {}", single_line(text)));
    }
    Ok(PromptBundle {
        system_instruction: task.instruction(schema)?,
        user_payload: lines.join("\n"),
        batch_indices,
    })
}
