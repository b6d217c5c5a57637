//! Core algorithms for benchmarking zero-shot LLM text classification
//! against traditional baselines.
//!
//! Everything in this crate is pure computation over in-memory data and only
//! needs an allocator, so it builds as `no_std` + `alloc`. File formats,
//! HTTP and the command line live in the `zsbench` companion crate.
//!
//! The pipeline pieces, in the order a benchmark run uses them:
//!
//! * [`dataset`]: label schemas, corpora and deterministic stratified splits
//! * [`preprocess`]: text cleaning, stop-word filtering and Porter stemming
//! * [`features`]: TF-IDF vocabulary fitting and sparse vectorization
//! * [`baselines`]: MNB, logistic regression, KNN, decision tree, random forest
//! * [`prompt`] and [`parse`]: the LLM prompt and the response repair path
//! * [`metrics`]: confusion matrix, ACC, macro-F1, MCC, one-vs-rest AUC

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod dataset;
pub mod features;
pub mod metrics;
pub mod parse;
pub mod preprocess;
pub mod prompt;

mod math;

pub use dataset::{Document, LabelId, LabelSchema, LabeledCorpus};
pub use features::{FeatureVector, Vectorizer};
pub use metrics::{ConfusionMatrix, EvalReport, RunAggregate};
