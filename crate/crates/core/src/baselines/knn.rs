use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_training_set, TrainError};
use crate::dataset::LabelId;
use crate::features::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    /// Positive and odd.
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

/// Lazy learner: keeps the training vectors and votes among the `k` most
/// cosine-similar ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    k: usize,
    n_classes: usize,
    dim: usize,
    vectors: Vec<FeatureVector>,
    norms: Vec<f64>,
    labels: Vec<LabelId>,
}

pub fn train_knn(
    features: &[FeatureVector],
    labels: &[LabelId],
    n_classes: usize,
    params: &KnnParams,
) -> Result<KnnModel, TrainError> {
    if params.k == 0 || params.k.is_multiple_of(2) {
        return Err(TrainError::InvalidHyperparameter("k must be a positive odd integer"));
    }
    let dim = check_training_set(features, labels, n_classes)?;
    if params.k > features.len() {
        return Err(TrainError::KTooLarge {
            k: params.k,
            n: features.len(),
        });
    }
    Ok(KnnModel {
        k: params.k,
        n_classes,
        dim,
        vectors: features.to_vec(),
        norms: features.iter().map(FeatureVector::norm).collect(),
        labels: labels.to_vec(),
    })
}

impl KnnModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn cosine(&self, i: usize, x: &FeatureVector, x_norm: f64) -> f64 {
        let denom = self.norms[i] * x_norm;
        if denom == 0.0 {
            0.0
        } else {
            self.vectors[i].dot(x) / denom
        }
    }

    /// Training indices of the `k` nearest neighbours, most similar first;
    /// equal similarities keep training order.
    pub fn neighbours(&self, x: &FeatureVector) -> Vec<usize> {
        let x_norm = x.norm();
        let mut sims: Vec<(f64, usize)> = (0..self.vectors.len())
            .map(|i| (self.cosine(i, x, x_norm), i))
            .collect();
        sims.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        sims.into_iter().take(self.k).map(|(_, i)| i).collect()
    }

    /// Fraction of neighbour votes per class.
    pub fn vote(&self, x: &FeatureVector) -> Vec<f64> {
        let mut votes = alloc::vec![0.0; self.n_classes];
        for i in self.neighbours(x) {
            votes[self.labels[i].0] += 1.0;
        }
        for v in &mut votes {
            *v /= self.k as f64;
        }
        votes
    }
}
