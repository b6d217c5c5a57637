//! CSV and JSONL corpus loading.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zsbench_core::dataset::{DatasetError, Document, LabelSchema, LabeledCorpus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{}: file not found", .0.display())]
    NotFound(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: unknown label {value:?} (expected one of {expected})")]
    UnknownLabel {
        line: u64,
        value: String,
        expected: String,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Loads `path` and validates every record against `schema`. Ids are
/// assigned 0..N in file order; labels match by trim + case-fold.
pub fn load_corpus(
    path: &Path,
    format: Format,
    text_field: &str,
    label_field: &str,
    schema: &LabelSchema,
) -> Result<LabeledCorpus, LoadError> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => LoadError::NotFound(path.to_path_buf()),
        _ => LoadError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    let rows = match format {
        Format::Csv => read_csv(file, text_field, label_field)?,
        Format::Jsonl => read_jsonl(path, file, text_field, label_field)?,
    };
    let mut documents = Vec::with_capacity(rows.len());
    for (line, text, label) in rows {
        if text.trim().is_empty() {
            return Err(LoadError::Malformed {
                line,
                message: format!("field {text_field:?} is empty"),
            });
        }
        let label = schema.lookup(&label).ok_or_else(|| LoadError::UnknownLabel {
            line,
            value: label.clone(),
            expected: schema.labels().join(", "),
        })?;
        documents.push(Document::new(documents.len(), text, Some(label)));
    }
    Ok(LabeledCorpus::new(schema.clone(), documents)?)
}

type Row = (u64, String, String);

fn read_csv(file: File, text_field: &str, label_field: &str) -> Result<Vec<Row>, LoadError> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(file);
    let malformed = |line: u64, message: String| LoadError::Malformed { line, message };
    let headers = reader
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| malformed(1, format!("header has no column {name:?}")))
    };
    let (text_col, label_col) = (column(text_field)?, column(label_field)?);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record[text_col].to_string(), record[label_col].to_string()));
    }
    Ok(rows)
}

fn read_jsonl(path: &Path, file: File, text_field: &str, label_field: &str) -> Result<Vec<Row>, LoadError> {
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => LoadError::Malformed {
                line: line_no,
                message: "not valid UTF-8".into(),
            },
            _ => LoadError::Io {
                path: path.to_path_buf(),
                source: e,
            },
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| LoadError::Malformed {
            line: line_no,
            message,
        };
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let field = |name: &str| match value.get(name) {
            Some(serde_json::Value::String(s)) => Ok(s.clone()),
            Some(other) => Err(malformed(format!("field {name:?} is not a string: {other}"))),
            None => Err(malformed(format!("missing field {name:?}"))),
        };
        rows.push((line_no, field(text_field)?, field(label_field)?));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use zsbench_core::LabelId;

    fn write(contents: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn spam_ham() -> LabelSchema {
        LabelSchema::new("sms", ["spam", "ham"]).unwrap()
    }

    #[test]
    fn csv_rows_become_documents() {
        let f = write("text,label\n\"free entry, win prize\",spam\nsee you at 5,ham\n", ".csv");
        let c = load_corpus(f.path(), Format::Csv, "text", "label", &spam_ham()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.documents()[0].text, "free entry, win prize");
        assert_eq!(c.documents()[1].label, Some(LabelId(1)));
        assert_eq!(c.ids(), [0, 1]);
    }

    #[test]
    fn labels_are_trimmed_and_case_folded() {
        let schema = LabelSchema::new("s", ["positive", "neutral", "negative"]).unwrap();
        let f = write("text,label\ngreat,\"Positive \"\n", ".csv");
        let c = load_corpus(f.path(), Format::Csv, "text", "label", &schema).unwrap();
        assert_eq!(c.documents()[0].label, Some(LabelId(0)));
    }

    #[test]
    fn unknown_label_names_value_and_line() {
        let f = write("text,label\na,spam\nb,eggs\n", ".csv");
        match load_corpus(f.path(), Format::Csv, "text", "label", &spam_ham()) {
            Err(LoadError::UnknownLabel { line, value, .. }) => assert_eq!((line, value.as_str()), (3, "eggs")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn jsonl_missing_field_names_the_line() {
        let f = write("{\"text\":\"a\",\"label\":\"spam\"}\n{\"text\":\"b\"}\n", ".jsonl");
        let err = load_corpus(f.path(), Format::Jsonl, "text", "label", &spam_ham()).unwrap_err();
        assert!(matches!(err, LoadError::Malformed { line: 2, .. }), "{err}");
        assert!(err.to_string().contains("\"label\""));
    }

    #[test]
    fn jsonl_loads() {
        let f = write("{\"body\":\"a\",\"y\":\"HAM\"}\n\n{\"body\":\"b\",\"y\":\"spam\"}\n", ".jsonl");
        let c = load_corpus(f.path(), Format::Jsonl, "body", "y", &spam_ham()).unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn missing_file_and_bad_csv() {
        let err = load_corpus(Path::new("/nonexistent/x.csv"), Format::Csv, "t", "l", &spam_ham()).unwrap_err();
        assert!(matches!(err, LoadError::NotFound(_)));
        let f = write("text,label\na,spam,extra\n", ".csv");
        let err = load_corpus(f.path(), Format::Csv, "text", "label", &spam_ham()).unwrap_err();
        assert!(matches!(err, LoadError::Malformed { line: 2, .. }), "{err}");
        let f = write("body,label\na,spam\n", ".csv");
        assert!(load_corpus(f.path(), Format::Csv, "text", "label", &spam_ham()).is_err());
        let f = write("text,label\n  ,spam\n", ".csv");
        assert!(matches!(
            load_corpus(f.path(), Format::Csv, "text", "label", &spam_ham()),
            Err(LoadError::Malformed { line: 2, .. })
        ));
    }
}
