//! TF-IDF features.
//!
//! The vocabulary is fitted on training documents only. Term weights are
//! `count(t, d) * idf(t)` with the smoothed
//! `idf(t) = ln((1 + N) / (1 + df(t))) + 1`, and every vector is then scaled to
//! unit Euclidean norm.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::preprocess::CleanedDocument;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeatureError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("every training document is empty")]
    AllDocumentsEmpty,
    #[error("all terms pruned (no term reaches min_df = {0})")]
    AllTermsPruned(usize),
    #[error("min_df and ngram_max must be at least 1")]
    InvalidParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VectorizerParams {
    pub min_df: usize,
    /// Longest n-gram to index; 1 means unigrams only.
    pub ngram_max: usize,
}

impl Default for VectorizerParams {
    fn default() -> Self {
        Self {
            min_df: 2,
            ngram_max: 1,
        }
    }
}

/// Sparse feature vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    /// Builds a vector from `(index, weight)` pairs in any order. Duplicate
    /// indices are summed and explicit zeros dropped.
    ///
    /// Panics if an index is out of range.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, w) in pairs {
            assert!(i < dim, "feature index {i} out of range for dimension {dim}");
            *acc.entry(i).or_insert(0.0) += w;
        }
        Self {
            dim,
            entries: acc.into_iter().filter(|&(_, w)| w != 0.0).collect(),
        }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        Self::from_pairs(values.len(), values.iter().copied().enumerate())
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        let mut sum = 0.0;
        while let (Some(&&(i, x)), Some(&&(j, y))) = (a.peek(), b.peek()) {
            match i.cmp(&j) {
                core::cmp::Ordering::Less => {
                    a.next();
                }
                core::cmp::Ordering::Greater => {
                    b.next();
                }
                core::cmp::Ordering::Equal => {
                    sum += x * y;
                    a.next();
                    b.next();
                }
            }
        }
        sum
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.entries.iter().map(|(_, w)| w * w).sum())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = alloc::vec![0.0; self.dim];
        for &(i, w) in &self.entries {
            dense[i] = w;
        }
        dense
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VectorizerDoc", into = "VectorizerDoc")]
pub struct Vectorizer {
    params: VectorizerParams,
    doc_count: usize,
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    idf: Vec<f64>,
    index: BTreeMap<String, usize>,
}

/// Serialized form: terms in index order with their statistics.
#[derive(Serialize, Deserialize)]
struct VectorizerDoc {
    params: VectorizerParams,
    doc_count: usize,
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    idf: Vec<f64>,
}

impl From<Vectorizer> for VectorizerDoc {
    fn from(v: Vectorizer) -> Self {
        Self {
            params: v.params,
            doc_count: v.doc_count,
            terms: v.terms,
            doc_freq: v.doc_freq,
            idf: v.idf,
        }
    }
}

impl TryFrom<VectorizerDoc> for Vectorizer {
    type Error = &'static str;

    fn try_from(doc: VectorizerDoc) -> Result<Self, Self::Error> {
        let n = doc.terms.len();
        if doc.doc_freq.len() != n || doc.idf.len() != n {
            return Err("terms, doc_freq and idf must have equal length");
        }
        let index: BTreeMap<String, usize> =
            doc.terms.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        if index.len() != n {
            return Err("duplicate term in vocabulary");
        }
        Ok(Self {
            params: doc.params,
            doc_count: doc.doc_count,
            terms: doc.terms,
            doc_freq: doc.doc_freq,
            idf: doc.idf,
            index,
        })
    }
}

/// Unigrams plus, when `ngram_max > 1`, space-joined n-grams.
fn terms_of(tokens: &[String], ngram_max: usize) -> Vec<String> {
    let mut out: Vec<String> = tokens.to_vec();
    for n in 2..=ngram_max {
        for window in tokens.windows(n) {
            out.push(window.join(" "));
        }
    }
    out
}

pub fn smoothed_idf(doc_count: usize, doc_freq: usize) -> f64 {
    math::ln((1.0 + doc_count as f64) / (1.0 + doc_freq as f64)) + 1.0
}

impl Vectorizer {
    pub fn fit(train: &[CleanedDocument], params: VectorizerParams) -> Result<Self, FeatureError> {
        if params.min_df == 0 || params.ngram_max == 0 {
            return Err(FeatureError::InvalidParams);
        }
        if train.is_empty() {
            return Err(FeatureError::EmptyTrainingSet);
        }
        if train.iter().all(CleanedDocument::is_empty) {
            return Err(FeatureError::AllDocumentsEmpty);
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in train {
            let mut seen = terms_of(&doc.tokens, params.ngram_max);
            seen.sort_unstable();
            seen.dedup();
            for term in seen {
                *df.entry(term).or_insert(0) += 1;
            }
        }
        let doc_count = train.len();
        let (terms, doc_freq): (Vec<String>, Vec<usize>) =
            df.into_iter().filter(|&(_, f)| f >= params.min_df).unzip();
        if terms.is_empty() {
            return Err(FeatureError::AllTermsPruned(params.min_df));
        }
        let idf = doc_freq.iter().map(|&f| smoothed_idf(doc_count, f)).collect();
        let index = terms.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        Ok(Self {
            params,
            doc_count,
            terms,
            doc_freq,
            idf,
            index,
        })
    }

    pub fn params(&self) -> VectorizerParams {
        self.params
    }

    /// Vocabulary size.
    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn doc_freq(&self, term: &str) -> Option<usize> {
        self.term_index(term).map(|i| self.doc_freq[i])
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.term_index(term).map(|i| self.idf[i])
    }

    /// Out-of-vocabulary tokens are ignored; a document with no known token
    /// maps to the zero vector.
    pub fn transform(&self, doc: &CleanedDocument) -> FeatureVector {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for term in terms_of(&doc.tokens, self.params.ngram_max) {
            if let Some(&i) = self.index.get(&term) {
                *counts.entry(i).or_insert(0.0) += 1.0;
            }
        }
        let mut entries: Vec<(usize, f64)> =
            counts.into_iter().map(|(i, c)| (i, c * self.idf[i])).collect();
        let norm = math::sqrt(entries.iter().map(|(_, w)| w * w).sum());
        if norm > 0.0 {
            for (_, w) in &mut entries {
                *w /= norm;
            }
        }
        FeatureVector {
            dim: self.dim(),
            entries,
        }
    }

    pub fn transform_all(&self, docs: &[CleanedDocument]) -> Vec<FeatureVector> {
        docs.iter().map(|d| self.transform(d)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn doc(id: usize, tokens: &[&str]) -> CleanedDocument {
        CleanedDocument::new(id, tokens.iter().map(|t| t.to_string()).collect())
    }

    fn unigrams(min_df: usize) -> VectorizerParams {
        VectorizerParams { min_df, ngram_max: 1 }
    }

    #[test]
    fn spam_ham_idf() {
        let docs = [doc(0, &["spam", "win"]), doc(1, &["ham"])];
        let v = Vectorizer::fit(&docs, unigrams(1)).unwrap();
        assert_eq!(v.dim(), 3);
        assert_eq!(v.doc_freq("spam"), Some(1));
        // ln(3/2) + 1
        assert!((v.idf("spam").unwrap() - 1.405_465_108_108_164_4).abs() < 1e-12);
        assert_eq!(
            Vectorizer::fit(&docs, unigrams(2)).unwrap_err(),
            FeatureError::AllTermsPruned(2)
        );
    }

    #[test]
    fn ubiquitous_term_has_unit_idf() {
        let docs = [doc(0, &["a", "b"]), doc(1, &["a"]), doc(2, &["a", "c"])];
        let v = Vectorizer::fit(&docs, unigrams(1)).unwrap();
        assert_eq!(v.idf("a"), Some(1.0));
    }

    #[test]
    fn repeated_term_normalizes_to_one() {
        let v = Vectorizer::fit(&[doc(0, &["spam", "win"]), doc(1, &["ham"])], unigrams(1)).unwrap();
        let x = v.transform(&doc(5, &["spam", "spam"]));
        assert_eq!(x.entries(), &[(v.term_index("spam").unwrap(), 1.0)]);
        assert!(v.transform(&doc(6, &["unknown"])).is_zero());
        assert!(v.transform(&doc(7, &[])).is_zero());
    }

    #[test]
    fn fit_errors() {
        assert_eq!(Vectorizer::fit(&[], unigrams(1)).unwrap_err(), FeatureError::EmptyTrainingSet);
        assert_eq!(
            Vectorizer::fit(&[doc(0, &[])], unigrams(1)).unwrap_err(),
            FeatureError::AllDocumentsEmpty
        );
    }

    #[test]
    fn bigrams_when_enabled() {
        let docs = [doc(0, &["free", "prize"]), doc(1, &["free", "prize", "now"])];
        let v = Vectorizer::fit(&docs, VectorizerParams { min_df: 2, ngram_max: 2 }).unwrap();
        assert_eq!(v.terms(), &["free", "free prize", "prize"]);
    }

    #[test]
    fn sparse_helpers() {
        let a = FeatureVector::from_pairs(5, vec![(3, 2.0), (0, 1.0), (3, 1.0), (1, 0.0)]);
        assert_eq!(a.entries(), &[(0, 1.0), (3, 3.0)]);
        let b = FeatureVector::from_dense(&[2.0, 0.0, 0.0, 1.0, 4.0]);
        assert_eq!(a.dot(&b), 5.0);
        assert_eq!(a.get(3), 3.0);
        assert_eq!(a.get(2), 0.0);
    }

    #[test]
    fn json_round_trip() {
        let docs = [doc(0, &["spam", "win"]), doc(1, &["ham", "win"])];
        let v = Vectorizer::fit(&docs, unigrams(1)).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        let back: Vectorizer = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
    }
}
