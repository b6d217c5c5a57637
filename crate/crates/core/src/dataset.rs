//! Label schemas, labeled corpora and deterministic stratified splitting.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Position of a label within its [`LabelSchema`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelId(pub usize);

impl LabelId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DatasetError {
    #[error("label schema needs at least 2 labels, got {0}")]
    TooFewLabels(usize),
    #[error("label schema contains an empty label")]
    EmptyLabel,
    #[error("label {0:?} is duplicated (labels are compared after trim and case-fold)")]
    DuplicateLabel(String),
    #[error("document id {0} appears more than once")]
    DuplicateId(usize),
    #[error("document {0} has empty text")]
    EmptyText(usize),
    #[error("document {id} carries label {label} outside the schema")]
    LabelOutOfSchema { id: usize, label: LabelId },
    #[error("document {0} has no gold label")]
    Unlabeled(usize),
    #[error("test size {test_size} exceeds corpus size {corpus_size}")]
    TestSizeTooLarge { test_size: usize, corpus_size: usize },
    #[error("test size must be positive")]
    ZeroTestSize,
    #[error("class {0:?} has no documents")]
    EmptyClass(String),
}

/// The closed, ordered label set of a task. Label order is the row order of
/// every confusion matrix and report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct LabelSchema {
    task_name: String,
    labels: Vec<String>,
}

#[derive(Deserialize)]
struct RawSchema {
    task_name: String,
    labels: Vec<String>,
}

impl TryFrom<RawSchema> for LabelSchema {
    type Error = DatasetError;

    fn try_from(raw: RawSchema) -> Result<Self, Self::Error> {
        LabelSchema::new(raw.task_name, raw.labels)
    }
}

/// Trim plus case-fold, the matching rule used wherever free text is
/// compared against schema labels.
pub fn fold_label(raw: &str) -> String {
    raw.trim().to_lowercase()
}

impl LabelSchema {
    pub fn new<S: Into<String>>(
        task_name: impl Into<String>,
        labels: impl IntoIterator<Item = S>,
    ) -> Result<Self, DatasetError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(DatasetError::TooFewLabels(labels.len()));
        }
        let mut seen = BTreeSet::new();
        for label in &labels {
            let folded = fold_label(label);
            if folded.is_empty() {
                return Err(DatasetError::EmptyLabel);
            }
            if !seen.insert(folded) {
                return Err(DatasetError::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self {
            task_name: task_name.into(),
            labels,
        })
    }

    pub fn task_name(&self) -> &str {
        &self.task_name
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn name(&self, id: LabelId) -> &str {
        &self.labels[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = LabelId> + '_ {
        (0..self.labels.len()).map(LabelId)
    }

    /// Exact, byte-for-byte lookup.
    pub fn lookup_exact(&self, raw: &str) -> Option<LabelId> {
        self.labels.iter().position(|l| l == raw).map(LabelId)
    }

    /// Lookup after trim and case-fold on both sides.
    pub fn lookup(&self, raw: &str) -> Option<LabelId> {
        let folded = fold_label(raw);
        self.labels
            .iter()
            .position(|l| fold_label(l) == folded)
            .map(LabelId)
    }
}

/// One raw text item with its optional gold label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: usize,
    pub text: String,
    pub label: Option<LabelId>,
}

impl Document {
    pub fn new(id: usize, text: impl Into<String>, label: Option<LabelId>) -> Self {
        Self {
            id,
            text: text.into(),
            label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledCorpus {
    schema: LabelSchema,
    documents: Vec<Document>,
}

impl LabeledCorpus {
    pub fn new(schema: LabelSchema, documents: Vec<Document>) -> Result<Self, DatasetError> {
        let mut ids = BTreeSet::new();
        for doc in &documents {
            if !ids.insert(doc.id) {
                return Err(DatasetError::DuplicateId(doc.id));
            }
            if doc.text.trim().is_empty() {
                return Err(DatasetError::EmptyText(doc.id));
            }
            if let Some(label) = doc.label {
                if label.0 >= schema.len() {
                    return Err(DatasetError::LabelOutOfSchema { id: doc.id, label });
                }
            }
        }
        Ok(Self { schema, documents })
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn ids(&self) -> Vec<usize> {
        self.documents.iter().map(|d| d.id).collect()
    }

    /// Gold labels in document order; fails on the first unlabeled document.
    pub fn gold_labels(&self) -> Result<Vec<LabelId>, DatasetError> {
        self.documents
            .iter()
            .map(|d| d.label.ok_or(DatasetError::Unlabeled(d.id)))
            .collect()
    }

    /// Per-label document counts in schema order. Unlabeled documents are
    /// not counted.
    pub fn class_distribution(&self) -> Vec<(String, usize)> {
        let mut counts = alloc::vec![0usize; self.schema.len()];
        for doc in &self.documents {
            if let Some(label) = doc.label {
                counts[label.0] += 1;
            }
        }
        self.schema
            .labels()
            .iter()
            .map(ToString::to_string)
            .zip(counts)
            .collect()
    }

    fn subset(&self, members: &[usize]) -> LabeledCorpus {
        LabeledCorpus {
            schema: self.schema.clone(),
            documents: members.iter().map(|&i| self.documents[i].clone()).collect(),
        }
    }
}

/// Per-class test quotas by largest-remainder rounding of
/// `test_size * count / total`. Remainders are compared exactly as integers;
/// ties go to the class earlier in schema order.
pub fn stratified_quotas(class_counts: &[usize], test_size: usize) -> Vec<usize> {
    let total: usize = class_counts.iter().sum();
    if total == 0 {
        return alloc::vec![0; class_counts.len()];
    }
    let mut quotas = Vec::with_capacity(class_counts.len());
    let mut remainders = Vec::with_capacity(class_counts.len());
    for (class, &count) in class_counts.iter().enumerate() {
        let scaled = test_size as u128 * count as u128;
        quotas.push((scaled / total as u128) as usize);
        remainders.push((scaled % total as u128, class));
    }
    let assigned: usize = quotas.iter().sum();
    // stable sort keeps schema order among equal remainders
    remainders.sort_by_key(|r| core::cmp::Reverse(r.0));
    for &(_, class) in remainders.iter().take(test_size - assigned) {
        quotas[class] += 1;
    }
    quotas
}

/// Splits `corpus` into a train and a class-proportional test set of exactly
/// `test_size` documents. Both halves keep the corpus' document order.
pub fn stratified_split(
    corpus: &LabeledCorpus,
    test_size: usize,
    seed: u64,
) -> Result<(LabeledCorpus, LabeledCorpus), DatasetError> {
    if test_size == 0 {
        return Err(DatasetError::ZeroTestSize);
    }
    if test_size > corpus.len() {
        return Err(DatasetError::TestSizeTooLarge {
            test_size,
            corpus_size: corpus.len(),
        });
    }
    let labels = corpus.gold_labels()?;
    let k = corpus.schema.len();
    let mut by_class: Vec<Vec<usize>> = alloc::vec![Vec::new(); k];
    for (pos, label) in labels.iter().enumerate() {
        by_class[label.0].push(pos);
    }
    if let Some(empty) = by_class.iter().position(Vec::is_empty) {
        return Err(DatasetError::EmptyClass(corpus.schema.labels[empty].clone()));
    }
    let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let quotas = stratified_quotas(&counts, test_size);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = alloc::vec![false; corpus.len()];
    for (members, &quota) in by_class.iter_mut().zip(&quotas) {
        members.shuffle(&mut rng);
        for &pos in members.iter().take(quota) {
            in_test[pos] = true;
        }
    }
    let (test, train): (Vec<usize>, Vec<usize>) =
        (0..corpus.len()).partition(|&pos| in_test[pos]);
    Ok((corpus.subset(&train), corpus.subset(&test)))
}
