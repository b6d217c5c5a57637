//! Text preprocessing: noise removal, case normalization, stop-word filtering
//! and stemming.
//!
//! [`clean_text`] applies the enabled removals in a fixed order
//! (URLs, HTML tags, mentions, hashtags, digits, punctuation) and then
//! lowercases. Every removed span is replaced by a space and whitespace runs
//! are collapsed at the end, so a removal never glues two neighbouring words
//! into a new match. That makes cleaning idempotent.

pub mod porter;
mod scan;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledCorpus;

pub use porter::stem;

/// Bundled English stop-word list, one word per line.
pub const STOPWORDS_EN: &str = include_str!("stopwords_en.txt");

/// Which cleaning steps to apply. Lowercasing always applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningPolicy {
    pub remove_urls: bool,
    pub remove_html_tags: bool,
    pub remove_digits: bool,
    pub remove_hashtags: bool,
    pub remove_mentions: bool,
    pub remove_punctuation: bool,
    pub remove_stopwords: bool,
    pub apply_stemming: bool,
}

impl Default for CleaningPolicy {
    fn default() -> Self {
        Self::full()
    }
}

impl CleaningPolicy {
    /// Every removal, stop-words and stemming.
    pub const fn full() -> Self {
        Self {
            remove_urls: true,
            remove_html_tags: true,
            remove_digits: true,
            remove_hashtags: true,
            remove_mentions: true,
            remove_punctuation: true,
            remove_stopwords: true,
            apply_stemming: true,
        }
    }

    /// Tweet cleaning: all removals plus stop-words, but words keep their
    /// surface form.
    pub const fn tweet() -> Self {
        Self {
            apply_stemming: false,
            ..Self::full()
        }
    }

    /// Lowercasing only.
    pub const fn none() -> Self {
        Self {
            remove_urls: false,
            remove_html_tags: false,
            remove_digits: false,
            remove_hashtags: false,
            remove_mentions: false,
            remove_punctuation: false,
            remove_stopwords: false,
            apply_stemming: false,
        }
    }
}

/// The token sequence of one document after preprocessing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanedDocument {
    pub id: usize,
    pub tokens: Vec<String>,
}

impl CleanedDocument {
    pub fn new(id: usize, tokens: Vec<String>) -> Self {
        Self { id, tokens }
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessedCorpus {
    pub documents: Vec<CleanedDocument>,
    /// Documents that ended up with no tokens at all.
    pub emptied: usize,
}

pub fn clean_text(text: &str, policy: &CleaningPolicy) -> String {
    let mut out = String::from(text);
    if policy.remove_urls {
        out = scan::remove_urls(&out);
    }
    if policy.remove_html_tags {
        out = scan::remove_html(&out);
    }
    if policy.remove_mentions {
        out = scan::remove_prefixed_words(&out, '@');
    }
    if policy.remove_hashtags {
        out = scan::remove_prefixed_words(&out, '#');
    }
    if policy.remove_digits {
        out = scan::replace_chars(&out, char::is_numeric);
    }
    if policy.remove_punctuation {
        out = scan::replace_chars(&out, |c| !c.is_alphanumeric() && !c.is_whitespace());
    }
    let lowered = scan::lowercase(&out);
    collapse_whitespace(&lowered)
}

fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

pub struct Stopwords(BTreeSet<&'static str>);

impl Stopwords {
    pub fn english() -> Self {
        Stopwords(
            STOPWORDS_EN
                .lines()
                .map(str::trim)
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Whitespace tokenization of already-cleaned text, then stop-word removal
/// and stemming as the policy requests.
pub fn normalize_tokens(text: &str, policy: &CleaningPolicy) -> Vec<String> {
    let stopwords = policy.remove_stopwords.then(Stopwords::english);
    normalize_with(text, policy, stopwords.as_ref())
}

fn normalize_with(text: &str, policy: &CleaningPolicy, stopwords: Option<&Stopwords>) -> Vec<String> {
    text.split_whitespace()
        .map(scan::lowercase)
        .filter(|t| stopwords.is_none_or(|sw| !sw.contains(t)))
        .map(|t| if policy.apply_stemming { stem(&t) } else { t })
        .collect()
}

/// Cleaned text re-joined after stop-word removal and stemming, the form
/// handed to an LLM when the cleaned-text variant is requested.
pub fn clean_for_prompt(text: &str, policy: &CleaningPolicy) -> String {
    normalize_tokens(&clean_text(text, policy), policy).join(" ")
}

pub fn preprocess_corpus(corpus: &LabeledCorpus, policy: &CleaningPolicy) -> PreprocessedCorpus {
    let stopwords = policy.remove_stopwords.then(Stopwords::english);
    let documents: Vec<CleanedDocument> = corpus
        .documents()
        .iter()
        .map(|doc| {
            let cleaned = clean_text(&doc.text, policy);
            CleanedDocument::new(doc.id, normalize_with(&cleaned, policy, stopwords.as_ref()))
        })
        .collect();
    let emptied = documents.iter().filter(|d| d.is_empty()).count();
    PreprocessedCorpus { documents, emptied }
}
