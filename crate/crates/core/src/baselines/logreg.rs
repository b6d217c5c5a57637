use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_set, TrainError};
use crate::dataset::LabelId;
use crate::features::FeatureVector;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegParams {
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub epochs: usize,
    /// Only used to shuffle minibatches.
    pub seed: u64,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
}

impl Default for LogRegParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            l2_lambda: 1e-4,
            epochs: 200,
            seed: 0,
            batch_size: None,
        }
    }
}

/// Weights of a multinomial softmax regression, `p(y | x) = softmax(W x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModelParams {
    n_classes: usize,
    dim: usize,
    /// `n_classes x dim`, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LinearModelParams {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        Self {
            n_classes,
            dim,
            weights: alloc::vec![0.0; n_classes * dim],
            bias: alloc::vec![0.0; n_classes],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn logits(&self, x: &FeatureVector) -> Vec<f64> {
        (0..self.n_classes)
            .map(|c| {
                let row = &self.weights[c * self.dim..(c + 1) * self.dim];
                self.bias[c] + x.entries().iter().map(|&(t, w)| w * row[t]).sum::<f64>()
            })
            .collect()
    }

    pub fn probabilities(&self, x: &FeatureVector) -> Vec<f64> {
        let mut p = self.logits(x);
        math::softmax_in_place(&mut p);
        p
    }

    fn all_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegFit {
    pub params: LinearModelParams,
    /// Training objective before each epoch, plus the final value.
    pub losses: Vec<f64>,
}

/// Mean cross-entropy plus `l2 / 2 * ||W||^2` (bias unregularized) and its
/// analytic gradient, returned in the shape of the parameters.
pub fn loss_and_gradient(
    params: &LinearModelParams,
    features: &[FeatureVector],
    labels: &[LabelId],
    l2_lambda: f64,
) -> (f64, LinearModelParams) {
    let (k, dim) = (params.n_classes, params.dim);
    let mut grad = LinearModelParams::zeros(k, dim);
    let n = features.len().max(1) as f64;
    let mut loss = 0.0;
    for (x, y) in features.iter().zip(labels) {
        let logits = params.logits(x);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + math::ln(logits.iter().map(|z| math::exp(z - max)).sum::<f64>());
        loss -= logits[y.0] - log_z;
        for (c, &z) in logits.iter().enumerate() {
            let delta = (math::exp(z - log_z) - f64::from(u8::from(c == y.0))) / n;
            grad.bias[c] += delta;
            let row = &mut grad.weights[c * dim..(c + 1) * dim];
            for &(t, w) in x.entries() {
                row[t] += delta * w;
            }
        }
    }
    loss /= n;
    let mut penalty = 0.0;
    for (g, w) in grad.weights.iter_mut().zip(&params.weights) {
        *g += l2_lambda * w;
        penalty += w * w;
    }
    (loss + 0.5 * l2_lambda * penalty, grad)
}

fn step(params: &mut LinearModelParams, grad: &LinearModelParams, lr: f64) {
    for (w, g) in params.weights.iter_mut().zip(&grad.weights) {
        *w -= lr * g;
    }
    for (b, g) in params.bias.iter_mut().zip(&grad.bias) {
        *b -= lr * g;
    }
}

/// Gradient descent from zero weights. Full-batch unless `batch_size` is set.
pub fn train_logreg(
    features: &[FeatureVector],
    labels: &[LabelId],
    n_classes: usize,
    hyper: &LogRegParams,
) -> Result<LogRegFit, TrainError> {
    if !(hyper.learning_rate > 0.0 && hyper.learning_rate.is_finite()) {
        return Err(TrainError::InvalidHyperparameter("learning_rate must be positive"));
    }
    if !(hyper.l2_lambda >= 0.0 && hyper.l2_lambda.is_finite()) {
        return Err(TrainError::InvalidHyperparameter("l2_lambda must be non-negative"));
    }
    if hyper.batch_size == Some(0) {
        return Err(TrainError::InvalidHyperparameter("batch_size must be positive"));
    }
    let dim = check_training_set(features, labels, n_classes)?;
    let mut params = LinearModelParams::zeros(n_classes, dim);
    let mut losses = Vec::with_capacity(hyper.epochs + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..features.len()).collect();

    for epoch in 0..=hyper.epochs {
        let (loss, grad) = loss_and_gradient(&params, features, labels, hyper.l2_lambda);
        if !loss.is_finite() || !params.all_finite() {
            return Err(TrainError::Diverged(epoch));
        }
        losses.push(loss);
        if epoch == hyper.epochs {
            break;
        }
        match hyper.batch_size {
            None => step(&mut params, &grad, hyper.learning_rate),
            Some(size) => {
                order.shuffle(&mut rng);
                for chunk in order.chunks(size) {
                    let xs: Vec<FeatureVector> = chunk.iter().map(|&i| features[i].clone()).collect();
                    let ys: Vec<LabelId> = chunk.iter().map(|&i| labels[i]).collect();
                    let (_, g) = loss_and_gradient(&params, &xs, &ys, hyper.l2_lambda);
                    step(&mut params, &g, hyper.learning_rate);
                }
            }
        }
    }
    Ok(LogRegFit { params, losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn separable() -> (Vec<FeatureVector>, Vec<LabelId>) {
        (
            vec![
                FeatureVector::from_dense(&[1.0, 0.0]),
                FeatureVector::from_dense(&[0.9, 0.1]),
                FeatureVector::from_dense(&[0.0, 1.0]),
                FeatureVector::from_dense(&[0.2, 0.8]),
            ],
            vec![LabelId(0), LabelId(0), LabelId(1), LabelId(1)],
        )
    }

    #[test]
    fn loss_strictly_decreases() {
        let (x, y) = separable();
        let fit = train_logreg(&x, &y, 2, &LogRegParams { epochs: 50, ..Default::default() }).unwrap();
        assert_eq!(fit.losses.len(), 51);
        for pair in fit.losses.windows(2) {
            assert!(pair[1] < pair[0], "{} !< {}", pair[1], pair[0]);
        }
    }

    #[test]
    fn zero_epochs_is_uniform() {
        let (x, y) = separable();
        let fit = train_logreg(&x, &y, 3, &LogRegParams { epochs: 0, ..Default::default() }).unwrap();
        for xi in &x {
            for p in fit.params.probabilities(xi) {
                assert!((p - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn divergence_names_the_epoch() {
        let (x, y) = separable();
        let hyper = LogRegParams {
            learning_rate: 1e300,
            epochs: 10,
            ..Default::default()
        };
        assert!(matches!(train_logreg(&x, &y, 2, &hyper), Err(TrainError::Diverged(e)) if e > 0));
    }

    #[test]
    fn minibatches_are_seeded() {
        let (x, y) = separable();
        let hyper = LogRegParams {
            batch_size: Some(1),
            epochs: 5,
            seed: 3,
            ..Default::default()
        };
        let a = train_logreg(&x, &y, 2, &hyper).unwrap();
        let b = train_logreg(&x, &y, 2, &hyper).unwrap();
        assert_eq!(a, b);
    }
}
