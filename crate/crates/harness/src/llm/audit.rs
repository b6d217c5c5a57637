//! JSONL audit trail of every provider exchange.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use base64::Engine;
use serde::{Deserialize, Serialize};
use zsbench_core::parse::{parse_response, ParseError, ParsedLabels};
use zsbench_core::LabelSchema;

use super::provider::ChatRequest;

/// Bytes stored as text when they are UTF-8 and as base64 otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditBytes {
    Utf8(String),
    Base64(String),
}

impl AuditBytes {
    pub fn from_bytes(bytes: &[u8]) -> Self {
        match std::str::from_utf8(bytes) {
            Ok(s) => AuditBytes::Utf8(s.to_owned()),
            Err(_) => AuditBytes::Base64(base64::engine::general_purpose::STANDARD.encode(bytes)),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, base64::DecodeError> {
        match self {
            AuditBytes::Utf8(s) => Ok(s.clone().into_bytes()),
            AuditBytes::Base64(b) => base64::engine::general_purpose::STANDARD.decode(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub predictor: String,
    pub run: usize,
    pub batch: usize,
    /// 0 for the first ask, 1 for the re-ask of unresolved items.
    pub ask: u32,
    pub doc_ids: Vec<usize>,
    pub batch_indices: Vec<u32>,
    pub request: ChatRequest,
    pub attempts: u32,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_body: Option<AuditBytes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parsed: Option<ParsedLabels>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
}

/// Append-only log shared by concurrent requests; each record is flushed as
/// soon as it is written so an aborted run keeps everything up to the abort.
#[derive(Debug)]
pub struct AuditLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl AuditLog {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &AuditRecord) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        file.write_all(&line)?;
        file.flush()
    }
}

pub fn read_audit(path: &Path) -> anyhow::Result<Vec<AuditRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| anyhow::anyhow!("{}:{}: {e}", path.display(), i + 1))?;
        records.push(record);
    }
    Ok(records)
}

/// Runs the parser again over a logged response. `None` for records that
/// failed before any response arrived.
pub fn replay(record: &AuditRecord, schema: &LabelSchema) -> Option<Result<ParsedLabels, ParseError>> {
    record
        .response_text
        .as_deref()
        .map(|text| parse_response(text, &record.batch_indices, schema))
}
