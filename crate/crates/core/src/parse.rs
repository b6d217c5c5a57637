//! Turning an untrusted LLM reply into schema labels.
//!
//! Two stages: [`extract_json_payload`] finds the first balanced `{...}`
//! region in the raw reply, and [`resolve_labels`] reads it as an
//! index → label map. The object reader is lenient: besides strict JSON it
//! accepts unquoted or single-quoted keys and values (`{1: Household}` is
//! what the prompt's own example looks like), trailing commas and missing
//! commas between entries. Labels are matched by trim + case-fold and are
//! never guessed beyond that.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{fold_label, LabelId, LabelSchema};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("no JSON object found")]
    NoJsonObject,
    #[error("JSON object is truncated (unbalanced braces)")]
    Truncated,
    #[error("payload is not an object: {0}")]
    NotAnObject(String),
    #[error("no entry refers to an index of this batch")]
    NoUsableEntries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Extracted<'a> {
    pub payload: &'a str,
    /// Non-whitespace text surrounded the object and was dropped.
    pub prose_stripped: bool,
}

/// Returns the first balanced top-level `{...}` region, skipping braces that
/// appear inside double-quoted strings.
pub fn extract_json_payload(raw: &str) -> Result<Extracted<'_>, ParseError> {
    let start = raw.find('{').ok_or(ParseError::NoJsonObject)?;
    let bytes = raw.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, &b) in bytes[start..].iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    let end = start + offset + 1;
                    let prose_stripped =
                        !raw[..start].trim().is_empty() || !raw[end..].trim().is_empty();
                    return Ok(Extracted {
                        payload: &raw[start..end],
                        prose_stripped,
                    });
                }
            }
            _ => {}
        }
    }
    Err(ParseError::Truncated)
}

/// Counters describing what had to be tolerated or dropped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub extraneous_text_stripped: u32,
    /// Batch indices with no entry at all in the reply.
    pub missing_index: u32,
    /// Entries whose key is not an index of the batch, is not an integer, or
    /// repeats an index already seen.
    pub extra_index: u32,
    pub unknown_label: u32,
    pub repaired_by_case_fold: u32,
}

impl ParseDiagnostics {
    pub fn merge(&mut self, other: &ParseDiagnostics) {
        self.extraneous_text_stripped += other.extraneous_text_stripped;
        self.missing_index += other.missing_index;
        self.extra_index += other.extra_index;
        self.unknown_label += other.unknown_label;
        self.repaired_by_case_fold += other.repaired_by_case_fold;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedLabels {
    pub resolved: BTreeMap<u32, LabelId>,
    /// Batch indices without a resolved label, in batch order: missing
    /// entries and entries with unknown labels alike.
    pub unresolved: Vec<u32>,
    /// Raw values that matched no schema label, by index.
    pub unknown: Vec<(u32, String)>,
    pub diagnostics: ParseDiagnostics,
}

/// Extraction followed by resolution, with the stripped-prose flag folded
/// into the diagnostics.
pub fn parse_response(
    raw: &str,
    batch_indices: &[u32],
    schema: &LabelSchema,
) -> Result<ParsedLabels, ParseError> {
    let extracted = extract_json_payload(raw)?;
    let mut parsed = resolve_labels(extracted.payload, batch_indices, schema)?;
    if extracted.prose_stripped {
        parsed.diagnostics.extraneous_text_stripped += 1;
    }
    Ok(parsed)
}

pub fn resolve_labels(
    payload: &str,
    batch_indices: &[u32],
    schema: &LabelSchema,
) -> Result<ParsedLabels, ParseError> {
    let mut entries = Reader::new(payload).object()?;
    // {"classifications": {...}} style wrappers
    while entries.len() == 1 && parse_index(&entries[0].0).is_none() {
        match &entries[0].1 {
            Value::Object(inner) => entries = inner.clone(),
            _ => break,
        }
    }

    let mut diagnostics = ParseDiagnostics::default();
    let mut resolved = BTreeMap::new();
    let mut seen: Vec<u32> = Vec::new();
    let mut unknown = Vec::new();
    for (key, value) in &entries {
        let index = match parse_index(key) {
            Some(i) if batch_indices.contains(&i) && !seen.contains(&i) => i,
            _ => {
                diagnostics.extra_index += 1;
                continue;
            }
        };
        seen.push(index);
        let text = match value {
            Value::Text(s) => s.as_str(),
            Value::Other(raw) => {
                diagnostics.unknown_label += 1;
                unknown.push((index, raw.clone()));
                continue;
            }
            Value::Object(_) => {
                diagnostics.unknown_label += 1;
                unknown.push((index, String::from("{...}")));
                continue;
            }
        };
        if let Some(label) = schema.lookup_exact(text) {
            resolved.insert(index, label);
        } else if let Some(label) = schema.lookup(text) {
            diagnostics.repaired_by_case_fold += 1;
            resolved.insert(index, label);
        } else {
            diagnostics.unknown_label += 1;
            unknown.push((index, String::from(text)));
        }
    }
    if seen.is_empty() {
        return Err(ParseError::NoUsableEntries);
    }
    diagnostics.missing_index = batch_indices.iter().filter(|i| !seen.contains(i)).count() as u32;
    let unresolved = batch_indices
        .iter()
        .copied()
        .filter(|i| !resolved.contains_key(i))
        .collect();
    Ok(ParsedLabels {
        resolved,
        unresolved,
        unknown,
        diagnostics,
    })
}

/// Integer keys, tolerating surrounding whitespace and a leading `#`.
fn parse_index(key: &str) -> Option<u32> {
    let key = key.trim();
    key.strip_prefix('#').unwrap_or(key).parse().ok()
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Value {
    Text(String),
    Object(Vec<(String, Value)>),
    /// Numbers, literals, arrays: kept as raw text for diagnostics.
    Other(String),
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

const MAX_DEPTH: usize = 16;

impl<'a> Reader<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn fail<T>(&self, what: &str) -> Result<T, ParseError> {
        Err(ParseError::NotAnObject(alloc::format!("{what} at byte {}", self.pos)))
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn object(&mut self) -> Result<Vec<(String, Value)>, ParseError> {
        self.skip_ws();
        let entries = self.object_at(0)?;
        self.skip_ws();
        if self.pos != self.src.len() {
            return self.fail("trailing characters");
        }
        Ok(entries)
    }

    fn object_at(&mut self, depth: usize) -> Result<Vec<(String, Value)>, ParseError> {
        if depth > MAX_DEPTH {
            return self.fail("nesting too deep");
        }
        if self.bump() != Some('{') {
            return self.fail("expected '{'");
        }
        let mut entries = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                None => return self.fail("unterminated object"),
                Some('}') => {
                    self.bump();
                    return Ok(entries);
                }
                Some(',') => {
                    self.bump();
                    continue;
                }
                Some(_) => {}
            }
            let key = self.key()?;
            self.skip_ws();
            if self.bump() != Some(':') {
                return self.fail("expected ':'");
            }
            self.skip_ws();
            let value = self.value(depth)?;
            entries.push((key, value));
        }
    }

    fn key(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(q @ ('"' | '\'')) => self.quoted(q),
            _ => {
                let start = self.pos;
                while self.peek().is_some_and(|c| !matches!(c, ':' | ',' | '}' | '{')) {
                    self.bump();
                }
                let key = self.src[start..self.pos].trim();
                if key.is_empty() {
                    return self.fail("empty key");
                }
                Ok(String::from(key))
            }
        }
    }

    fn value(&mut self, depth: usize) -> Result<Value, ParseError> {
        match self.peek() {
            None => self.fail("missing value"),
            Some(q @ ('"' | '\'')) => Ok(Value::Text(self.quoted(q)?)),
            Some('{') => Ok(Value::Object(self.object_at(depth + 1)?)),
            Some('[') => {
                let start = self.pos;
                self.skip_array()?;
                Ok(Value::Other(String::from(&self.src[start..self.pos])))
            }
            Some(_) => {
                let start = self.pos;
                while self.peek().is_some_and(|c| !matches!(c, ',' | '}' | '\n')) {
                    self.bump();
                }
                let bare = self.src[start..self.pos].trim();
                let is_literal = matches!(bare, "null" | "true" | "false")
                    || bare.parse::<f64>().is_ok();
                if bare.is_empty() {
                    self.fail("missing value")
                } else if is_literal {
                    Ok(Value::Other(String::from(bare)))
                } else {
                    Ok(Value::Text(String::from(bare)))
                }
            }
        }
    }

    fn skip_array(&mut self) -> Result<(), ParseError> {
        let mut depth = 0usize;
        let mut quote: Option<char> = None;
        while let Some(c) = self.bump() {
            match (quote, c) {
                (Some(_), '\\') => {
                    self.bump();
                }
                (Some(q), c) if c == q => quote = None,
                (Some(_), _) => {}
                (None, '"' | '\'') => quote = Some(c),
                (None, '[' | '{') => depth += 1,
                (None, ']' | '}') => {
                    depth = depth.saturating_sub(1);
                    if depth == 0 {
                        return Ok(());
                    }
                }
                _ => {}
            }
        }
        self.fail("unterminated array")
    }

    fn quoted(&mut self, quote: char) -> Result<String, ParseError> {
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return self.fail("unterminated string"),
                Some(c) if c == quote => return Ok(out),
                Some('\\') => match self.bump() {
                    None => return self.fail("unterminated escape"),
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('r') => out.push('\r'),
                    Some('b') => out.push('\u{8}'),
                    Some('f') => out.push('\u{c}'),
                    Some('u') => out.push(self.unicode_escape()?),
                    Some(other) => out.push(other),
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn hex4(&mut self) -> Result<u32, ParseError> {
        let digits = self.src.get(self.pos..self.pos + 4);
        match digits.and_then(|d| u32::from_str_radix(d, 16).ok()) {
            Some(v) if digits.is_some_and(|d| d.bytes().all(|b| b.is_ascii_hexdigit())) => {
                self.pos += 4;
                Ok(v)
            }
            _ => self.fail("bad \\u escape"),
        }
    }

    fn unicode_escape(&mut self) -> Result<char, ParseError> {
        let first = self.hex4()?;
        if (0xD800..0xDC00).contains(&first) && self.src[self.pos..].starts_with("\\u") {
            let save = self.pos;
            self.pos += 2;
            let second = self.hex4()?;
            if (0xDC00..0xE000).contains(&second) {
                let combined = 0x10000 + ((first - 0xD800) << 10) + (second - 0xDC00);
                return Ok(char::from_u32(combined).unwrap_or(char::REPLACEMENT_CHARACTER));
            }
            self.pos = save;
        }
        Ok(char::from_u32(first).unwrap_or(char::REPLACEMENT_CHARACTER))
    }
}

/// Labels compared the way resolution compares them; exposed for callers
/// that pre-check configured label names.
pub fn label_key(label: &str) -> String {
    fold_label(label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ecommerce() -> LabelSchema {
        LabelSchema::new(
            "e-commerce",
            ["Household", "Books", "Clothing & Accessories", "Electronics"],
        )
        .unwrap()
    }

    fn spam() -> LabelSchema {
        LabelSchema::new("sms", ["spam", "ham"]).unwrap()
    }

    #[test]
    fn clean_object_passes_through() {
        let e = extract_json_payload(r#"{"1": "Household"}"#).unwrap();
        assert_eq!(e.payload, r#"{"1": "Household"}"#);
        assert!(!e.prose_stripped);
    }

    #[test]
    fn prose_is_stripped() {
        let raw = r#"Sure! Here you go: {"1":"spam","2":"ham"} Hope that helps!"#;
        let e = extract_json_payload(raw).unwrap();
        assert_eq!(e.payload, r#"{"1":"spam","2":"ham"}"#);
        assert!(e.prose_stripped);
        let p = parse_response(raw, &[1, 2], &spam()).unwrap();
        assert_eq!(p.diagnostics.extraneous_text_stripped, 1);
        assert_eq!(p.resolved.len(), 2);
    }

    #[test]
    fn extraction_errors() {
        assert_eq!(extract_json_payload("no json here"), Err(ParseError::NoJsonObject));
        assert_eq!(extract_json_payload(r#"{"1": "sp"#), Err(ParseError::Truncated));
        let e = extract_json_payload(r#"{"1": "a}b"} tail"#).unwrap();
        assert_eq!(e.payload, r#"{"1": "a}b"}"#);
    }

    #[test]
    fn case_fold_repair() {
        let p = resolve_labels(r#"{"1":"household"}"#, &[1], &ecommerce()).unwrap();
        assert_eq!(p.resolved[&1], LabelId(0));
        assert_eq!(p.diagnostics.repaired_by_case_fold, 1);
    }

    #[test]
    fn extra_and_missing_indices() {
        let p = resolve_labels(r#"{"1":"Books","9":"Books"}"#, &[1, 2], &ecommerce()).unwrap();
        assert_eq!(p.resolved[&1], LabelId(1));
        assert_eq!(p.diagnostics.extra_index, 1);
        assert_eq!(p.diagnostics.missing_index, 1);
        assert_eq!(p.unresolved, vec![2]);
    }

    #[test]
    fn unknown_label_is_not_guessed() {
        let p = resolve_labels(r#"{"1":"Grocery"}"#, &[1], &ecommerce()).unwrap();
        assert!(p.resolved.is_empty());
        assert_eq!(p.diagnostics.unknown_label, 1);
        assert_eq!(p.diagnostics.missing_index, 0);
        assert_eq!(p.unknown, vec![(1, "Grocery".into())]);
        assert_eq!(p.unresolved, vec![1]);
    }

    #[test]
    fn lenient_forms() {
        let schema = ecommerce();
        let p = resolve_labels("{1: Household, 2: Clothing & Accessories}", &[1, 2], &schema).unwrap();
        assert_eq!(p.resolved[&2], LabelId(2));
        let p = resolve_labels("{'1': 'Books', '2': 'Books',}", &[1, 2], &schema).unwrap();
        assert_eq!(p.resolved.len(), 2);
        let p = resolve_labels("{\"1\": \"Books\"\n\"2\": \"Electronics\"}", &[1, 2], &schema).unwrap();
        assert_eq!(p.resolved.len(), 2);
        let p = resolve_labels(r#"{"results": {"1": "Books"}}"#, &[1], &schema).unwrap();
        assert_eq!(p.resolved[&1], LabelId(1));
        let p = resolve_labels(r#"{"1": "Clothing & Accessories"}"#, &[1], &schema).unwrap();
        assert_eq!(p.resolved[&1], LabelId(2));
    }

    #[test]
    fn duplicate_and_non_integer_keys_are_extra() {
        let p = resolve_labels(r#"{"1":"spam","1":"ham","x":"ham"}"#, &[1], &spam()).unwrap();
        assert_eq!(p.resolved[&1], LabelId(0));
        assert_eq!(p.diagnostics.extra_index, 2);
    }

    #[test]
    fn non_string_values_are_unknown() {
        let p = resolve_labels(r#"{"1": null, "2": ["spam"], "3": 4}"#, &[1, 2, 3], &spam()).unwrap();
        assert_eq!(p.diagnostics.unknown_label, 3);
        assert_eq!(p.unresolved, vec![1, 2, 3]);
    }

    #[test]
    fn resolution_errors() {
        assert!(matches!(
            resolve_labels("[1, 2]", &[1], &spam()),
            Err(ParseError::NotAnObject(_))
        ));
        assert_eq!(resolve_labels("{}", &[1], &spam()), Err(ParseError::NoUsableEntries));
        assert_eq!(
            resolve_labels(r#"{"7": "spam"}"#, &[1], &spam()),
            Err(ParseError::NoUsableEntries)
        );
    }
}
