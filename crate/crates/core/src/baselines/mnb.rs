use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_training_set, require_every_class, TrainError};
use crate::dataset::LabelId;
use crate::features::FeatureVector;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MnbParams {
    /// Additive (Lidstone) smoothing.
    pub alpha: f64,
}

impl Default for MnbParams {
    fn default() -> Self {
        Self { alpha: 1.0 }
    }
}

/// Multinomial naive Bayes over (possibly fractional) term weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnbModel {
    alpha: f64,
    dim: usize,
    log_prior: Vec<f64>,
    /// `n_classes x dim`, row-major.
    log_likelihood: Vec<f64>,
}

/// Class prior `count / N`; term likelihood
/// `(weight of term in class + alpha) / (total weight in class + alpha * V)`.
pub fn train_mnb(
    features: &[FeatureVector],
    labels: &[LabelId],
    n_classes: usize,
    params: &MnbParams,
) -> Result<MnbModel, TrainError> {
    if !(params.alpha > 0.0 && params.alpha.is_finite()) {
        return Err(TrainError::InvalidHyperparameter("alpha must be positive and finite"));
    }
    let dim = check_training_set(features, labels, n_classes)?;
    let counts = require_every_class(labels, n_classes)?;
    let n = features.len() as f64;

    let mut term_weight = alloc::vec![0.0; n_classes * dim];
    let mut class_weight = alloc::vec![0.0; n_classes];
    for (x, label) in features.iter().zip(labels) {
        let row = label.0 * dim;
        for &(t, w) in x.entries() {
            term_weight[row + t] += w;
            class_weight[label.0] += w;
        }
    }

    let alpha = params.alpha;
    let mut log_likelihood = Vec::with_capacity(n_classes * dim);
    for c in 0..n_classes {
        let denom = math::ln(class_weight[c] + alpha * dim as f64);
        for t in 0..dim {
            log_likelihood.push(math::ln(term_weight[c * dim + t] + alpha) - denom);
        }
    }
    Ok(MnbModel {
        alpha,
        dim,
        log_prior: counts.iter().map(|&c| math::ln(c as f64 / n)).collect(),
        log_likelihood,
    })
}

impl MnbModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.log_prior.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn prior(&self, class: LabelId) -> f64 {
        math::exp(self.log_prior[class.0])
    }

    /// `P(term | class)`.
    pub fn likelihood(&self, class: LabelId, term: usize) -> f64 {
        math::exp(self.log_likelihood[class.0 * self.dim + term])
    }

    /// Unnormalized joint log-probabilities `log P(c) + sum_t w_t log P(t | c)`.
    pub fn joint_log_likelihood(&self, x: &FeatureVector) -> Vec<f64> {
        (0..self.n_classes())
            .map(|c| {
                let row = &self.log_likelihood[c * self.dim..(c + 1) * self.dim];
                self.log_prior[c] + x.entries().iter().map(|&(t, w)| w * row[t]).sum::<f64>()
            })
            .collect()
    }

    pub fn posterior(&self, x: &FeatureVector) -> Vec<f64> {
        let mut scores = self.joint_log_likelihood(x);
        math::softmax_in_place(&mut scores);
        scores
    }
}
