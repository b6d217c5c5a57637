use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, TreeModel, TreeParams};
use super::{check_training_set, TrainError};
use crate::dataset::LabelId;
use crate::features::FeatureVector;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSubsample {
    /// `ceil(sqrt(V))` candidate features per split.
    Sqrt,
    /// Every feature, as in a plain decision tree.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub feature_subsample: FeatureSubsample,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 32,
            min_leaf: 1,
            feature_subsample: FeatureSubsample::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    seed: u64,
    dim: usize,
    trees: Vec<TreeModel>,
}

/// Tree `i` draws its bootstrap sample and split candidates from its own
/// generator seeded by `(seed, i)`, so trees do not depend on each other.
pub fn train_rf(
    features: &[FeatureVector],
    labels: &[LabelId],
    n_classes: usize,
    params: &ForestParams,
) -> Result<ForestModel, TrainError> {
    if params.n_trees == 0 {
        return Err(TrainError::InvalidHyperparameter("n_trees must be at least 1"));
    }
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
    };
    tree_params.validate()?;
    let dim = check_training_set(features, labels, n_classes)?;
    let n = features.len();
    let per_split = match params.feature_subsample {
        FeatureSubsample::Sqrt => {
            let mut s = math::sqrt(dim as f64) as usize;
            while s * s < dim {
                s += 1;
            }
            s.max(1)
        }
        FeatureSubsample::All => usize::MAX,
    };

    let trees = (0..params.n_trees)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(math::derive_seed(params.seed, t as u64));
            let samples: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut choose = |pool: &[usize]| -> Vec<usize> {
                if pool.len() <= per_split {
                    return pool.to_vec();
                }
                let mut pool = pool.to_vec();
                for i in 0..per_split {
                    let j = rng.random_range(i..pool.len());
                    pool.swap(i, j);
                }
                pool.truncate(per_split);
                pool.sort_unstable();
                pool
            };
            grow_tree(features, labels, n_classes, samples, &tree_params, &mut choose)
        })
        .collect();
    Ok(ForestModel {
        seed: params.seed,
        dim,
        trees,
    })
}

impl ForestModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trees(&self) -> &[TreeModel] {
        &self.trees
    }

    /// Mean of the per-tree leaf distributions.
    pub fn distribution(&self, x: &FeatureVector) -> Vec<f64> {
        let mut acc: Vec<f64> = Vec::new();
        for tree in &self.trees {
            let d = tree.distribution(x);
            if acc.is_empty() {
                acc = d;
            } else {
                for (a, v) in acc.iter_mut().zip(d) {
                    *a += v;
                }
            }
        }
        let n = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}
