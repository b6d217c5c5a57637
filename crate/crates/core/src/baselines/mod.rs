//! The traditional classifiers: multinomial naive Bayes, softmax logistic
//! regression, k-nearest neighbours, a Gini decision tree and a random
//! forest. All of them train on [`FeatureVector`]s and predict a full
//! probability distribution over the label schema.

mod forest;
mod knn;
mod logreg;
mod mnb;
mod tree;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::LabelId;
use crate::features::FeatureVector;
use crate::math;

pub use forest::{train_rf, FeatureSubsample, ForestModel, ForestParams};
pub use knn::{train_knn, KnnModel, KnnParams};
pub use logreg::{loss_and_gradient, train_logreg, LinearModelParams, LogRegFit, LogRegParams};
pub use mnb::{train_mnb, MnbModel, MnbParams};
pub use tree::{train_dt, TreeModel, TreeParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{features} feature vectors but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("feature vectors disagree on dimension ({expected} vs {found})")]
    RaggedFeatures { expected: usize, found: usize },
    #[error("label {0} is outside the {1}-label schema")]
    LabelOutOfRange(LabelId, usize),
    #[error("class {0} has no training documents")]
    ClassAbsent(LabelId),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(&'static str),
    #[error("k = {k} exceeds the {n} training samples")]
    KTooLarge { k: usize, n: usize },
    #[error("training diverged at epoch {0} (loss is not finite)")]
    Diverged(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PredictError {
    #[error("feature dimension {found} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// A probability distribution over the schema labels for one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub doc_id: usize,
    pub scores: Vec<f64>,
    pub label: LabelId,
}

impl ScoredPrediction {
    /// Picks the argmax; ties go to the label earlier in schema order.
    pub fn from_scores(doc_id: usize, scores: Vec<f64>) -> Self {
        let label = LabelId(math::argmax(&scores));
        Self {
            doc_id,
            scores,
            label,
        }
    }

    /// Degenerate distribution for label-only predictors.
    pub fn one_hot(doc_id: usize, label: LabelId, n_labels: usize) -> Self {
        let mut scores = alloc::vec![0.0; n_labels];
        scores[label.0] = 1.0;
        Self {
            doc_id,
            scores,
            label,
        }
    }
}

/// Which baseline to train, with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaselineSpec {
    Mnb(MnbParams),
    #[serde(rename = "lr", alias = "lg", alias = "logreg")]
    LogReg(LogRegParams),
    Knn(KnnParams),
    Dt(TreeParams),
    Rf(ForestParams),
}

impl BaselineSpec {
    /// Roster names accepted in configs.
    pub const KINDS: [&'static str; 7] = ["mnb", "lr", "lg", "logreg", "knn", "dt", "rf"];

    pub fn display_name(&self) -> &'static str {
        match self {
            BaselineSpec::Mnb(_) => "MNB",
            BaselineSpec::LogReg(_) => "LR",
            BaselineSpec::Knn(_) => "KNN",
            BaselineSpec::Dt(_) => "DT",
            BaselineSpec::Rf(_) => "RF",
        }
    }

    pub fn train(
        &self,
        features: &[FeatureVector],
        labels: &[LabelId],
        n_classes: usize,
    ) -> Result<Model, TrainError> {
        Ok(match self {
            BaselineSpec::Mnb(p) => Model::Mnb(train_mnb(features, labels, n_classes, p)?),
            BaselineSpec::LogReg(p) => {
                Model::LogReg(train_logreg(features, labels, n_classes, p)?.params)
            }
            BaselineSpec::Knn(p) => Model::Knn(train_knn(features, labels, n_classes, p)?),
            BaselineSpec::Dt(p) => Model::Tree(train_dt(features, labels, n_classes, p)?),
            BaselineSpec::Rf(p) => Model::Forest(train_rf(features, labels, n_classes, p)?),
        })
    }
}

/// Any trained baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Mnb(MnbModel),
    LogReg(LinearModelParams),
    Knn(KnnModel),
    Tree(TreeModel),
    Forest(ForestModel),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Mnb(m) => m.dim(),
            Model::LogReg(m) => m.dim(),
            Model::Knn(m) => m.dim(),
            Model::Tree(m) => m.dim(),
            Model::Forest(m) => m.dim(),
        }
    }

    pub fn predict_scores(
        &self,
        doc_id: usize,
        x: &FeatureVector,
    ) -> Result<ScoredPrediction, PredictError> {
        if x.dim() != self.dim() {
            return Err(PredictError::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        let scores = match self {
            Model::Mnb(m) => m.posterior(x),
            Model::LogReg(m) => m.probabilities(x),
            Model::Knn(m) => m.vote(x),
            Model::Tree(m) => m.distribution(x),
            Model::Forest(m) => m.distribution(x),
        };
        Ok(ScoredPrediction::from_scores(doc_id, scores))
    }
}

/// Shared input validation; returns the feature dimension.
fn check_training_set(
    features: &[FeatureVector],
    labels: &[LabelId],
    n_classes: usize,
) -> Result<usize, TrainError> {
    if features.len() != labels.len() {
        return Err(TrainError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    let first = features.first().ok_or(TrainError::EmptyTrainingSet)?;
    let dim = first.dim();
    if let Some(bad) = features.iter().find(|f| f.dim() != dim) {
        return Err(TrainError::RaggedFeatures {
            expected: dim,
            found: bad.dim(),
        });
    }
    if let Some(&bad) = labels.iter().find(|l| l.0 >= n_classes) {
        return Err(TrainError::LabelOutOfRange(bad, n_classes));
    }
    Ok(dim)
}

fn class_counts(labels: &[LabelId], n_classes: usize) -> Vec<usize> {
    let mut counts = alloc::vec![0; n_classes];
    for l in labels {
        counts[l.0] += 1;
    }
    counts
}

fn require_every_class(labels: &[LabelId], n_classes: usize) -> Result<Vec<usize>, TrainError> {
    let counts = class_counts(labels, n_classes);
    match counts.iter().position(|&c| c == 0) {
        Some(missing) => Err(TrainError::ClassAbsent(LabelId(missing))),
        None => Ok(counts),
    }
}
