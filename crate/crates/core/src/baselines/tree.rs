use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_training_set, class_counts, TrainError};
use crate::dataset::LabelId;
use crate::features::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 32,
            min_leaf: 1,
        }
    }
}

impl TreeParams {
    pub(super) fn validate(&self) -> Result<(), TrainError> {
        if self.max_depth < 1 {
            return Err(TrainError::InvalidHyperparameter("max_depth must be at least 1"));
        }
        if self.min_leaf < 1 {
            return Err(TrainError::InvalidHyperparameter("min_leaf must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        counts: Vec<usize>,
    },
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary classification tree grown greedily on Gini impurity. `nodes[0]`
/// is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    dim: usize,
    n_classes: usize,
    nodes: Vec<Node>,
}

pub fn train_dt(
    features: &[FeatureVector],
    labels: &[LabelId],
    n_classes: usize,
    params: &TreeParams,
) -> Result<TreeModel, TrainError> {
    params.validate()?;
    check_training_set(features, labels, n_classes)?;
    let samples: Vec<usize> = (0..features.len()).collect();
    Ok(grow_tree(features, labels, n_classes, samples, params, &mut |pool| pool.to_vec()))
}

/// Picks the candidate features for one split from the features that are
/// non-constant in the node (given in increasing order). Must return them in
/// increasing order.
pub(super) type FeatureChooser<'a> = dyn FnMut(&[usize]) -> Vec<usize> + 'a;

pub(super) fn grow_tree(
    features: &[FeatureVector],
    labels: &[LabelId],
    n_classes: usize,
    samples: Vec<usize>,
    params: &TreeParams,
    choose: &mut FeatureChooser<'_>,
) -> TreeModel {
    let mut builder = Builder {
        features,
        labels,
        n_classes,
        params,
        nodes: Vec::new(),
    };
    builder.grow(samples, 0, choose);
    TreeModel {
        dim: features.first().map_or(0, FeatureVector::dim),
        n_classes,
        nodes: builder.nodes,
    }
}

struct Builder<'a> {
    features: &'a [FeatureVector],
    labels: &'a [LabelId],
    n_classes: usize,
    params: &'a TreeParams,
    nodes: Vec<Node>,
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

/// `n * gini` for a count vector, i.e. `n - sum(c^2) / n`.
fn weighted_gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    n as f64 - sq / n as f64
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

impl Builder<'_> {
    fn grow(&mut self, samples: Vec<usize>, depth: usize, choose: &mut FeatureChooser<'_>) -> usize {
        let counts = class_counts(
            &samples.iter().map(|&i| self.labels[i]).collect::<Vec<_>>(),
            self.n_classes,
        );
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf {
            counts: counts.clone(),
        });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.params.max_depth || samples.len() < 2 * self.params.min_leaf {
            return slot;
        }
        let Some(split) = self.best_split(&samples, &counts, choose) else {
            return slot;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&i| self.features[i].get(split.feature) <= split.threshold);
        let left = self.grow(left, depth + 1, choose);
        let right = self.grow(right, depth + 1, choose);
        self.nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        slot
    }

    fn best_split(
        &self,
        samples: &[usize],
        node_counts: &[usize],
        choose: &mut FeatureChooser<'_>,
    ) -> Option<Split> {
        let n = samples.len();
        let mut nonzero: Vec<(usize, f64, usize)> = Vec::new();
        for &i in samples {
            let class = self.labels[i].0;
            nonzero.extend(self.features[i].entries().iter().map(|&(f, v)| (f, v, class)));
        }
        nonzero.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

        // (feature, start, end) ranges into `nonzero`
        let mut ranges: Vec<(usize, usize, usize)> = Vec::new();
        let mut start = 0;
        while start < nonzero.len() {
            let f = nonzero[start].0;
            let end = start + nonzero[start..].iter().take_while(|e| e.0 == f).count();
            ranges.push((f, start, end));
            start = end;
        }
        // a feature nonzero in every sample with a single value is constant
        let pool: Vec<usize> = ranges
            .iter()
            .filter(|&&(_, s, e)| e - s < n || nonzero[s].1 != nonzero[e - 1].1)
            .map(|&(f, _, _)| f)
            .collect();
        if pool.is_empty() {
            return None;
        }
        let candidates = choose(&pool);

        let parent = weighted_gini(node_counts, n);
        let mut best: Option<Split> = None;
        for f in candidates {
            let Ok(pos) = ranges.binary_search_by_key(&f, |r| r.0) else {
                continue;
            };
            let (_, s, e) = ranges[pos];
            if let Some(split) = self.best_threshold(f, &nonzero[s..e], node_counts, n) {
                if best.as_ref().is_none_or(|b| split.impurity < b.impurity) {
                    best = Some(split);
                }
            }
        }
        best.filter(|b| b.impurity < parent - 1e-12)
    }

    /// Sweeps the sorted distinct values of one feature, with the implicit
    /// zero entries forming one group at value 0.
    fn best_threshold(
        &self,
        feature: usize,
        values: &[(usize, f64, usize)],
        node_counts: &[usize],
        n: usize,
    ) -> Option<Split> {
        let k = self.n_classes;
        let mut zero_counts = node_counts.to_vec();
        for &(_, _, c) in values {
            zero_counts[c] -= 1;
        }
        let n_zero = n - values.len();

        // groups of equal value in increasing order: (value, counts, size)
        let mut groups: Vec<(f64, Vec<usize>, usize)> = Vec::new();
        let mut zero_placed = n_zero == 0;
        for &(_, v, c) in values {
            if !zero_placed && v > 0.0 {
                groups.push((0.0, zero_counts.clone(), n_zero));
                zero_placed = true;
            }
            match groups.last_mut() {
                Some(g) if g.0 == v => {
                    g.1[c] += 1;
                    g.2 += 1;
                }
                _ => {
                    let mut counts = alloc::vec![0; k];
                    counts[c] = 1;
                    groups.push((v, counts, 1));
                }
            }
        }
        if !zero_placed {
            groups.push((0.0, zero_counts, n_zero));
        }

        let min_leaf = self.params.min_leaf;
        let mut left = alloc::vec![0usize; k];
        let mut left_n = 0;
        let mut best: Option<Split> = None;
        for w in 0..groups.len().saturating_sub(1) {
            for (l, g) in left.iter_mut().zip(&groups[w].1) {
                *l += g;
            }
            left_n += groups[w].2;
            let right_n = n - left_n;
            if left_n < min_leaf || right_n < min_leaf {
                continue;
            }
            let right: Vec<usize> = node_counts.iter().zip(&left).map(|(t, l)| t - l).collect();
            let impurity = weighted_gini(&left, left_n) + weighted_gini(&right, right_n);
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                best = Some(Split {
                    feature,
                    threshold: midpoint(groups[w].0, groups[w + 1].0),
                    impurity,
                });
            }
        }
        best
    }
}

impl TreeModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Edges on the longest root-to-leaf path; a lone leaf has depth 0.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_counts(&self, x: &FeatureVector) -> &[usize] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x.get(*feature) <= *threshold { *left } else { *right },
            }
        }
    }

    /// Class frequencies of the reached leaf, normalized.
    pub fn distribution(&self, x: &FeatureVector) -> Vec<f64> {
        let counts = self.leaf_counts(x);
        let total: usize = counts.iter().sum();
        if total == 0 {
            return alloc::vec![1.0 / self.n_classes as f64; self.n_classes];
        }
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn pure_input_is_a_single_leaf() {
        let x = vec![FeatureVector::from_dense(&[0.3, 0.0]), FeatureVector::from_dense(&[0.0, 0.7])];
        let y = vec![LabelId(1), LabelId(1)];
        let t = train_dt(&x, &y, 2, &TreeParams::default()).unwrap();
        assert_eq!(t.depth(), 0);
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.distribution(&x[0]), vec![0.0, 1.0]);
    }

    #[test]
    fn separates_on_the_informative_feature() {
        let x = vec![
            FeatureVector::from_dense(&[0.0, 0.5]),
            FeatureVector::from_dense(&[0.0, 0.9]),
            FeatureVector::from_dense(&[0.4, 0.5]),
            FeatureVector::from_dense(&[0.8, 0.5]),
        ];
        let y = vec![LabelId(0), LabelId(0), LabelId(1), LabelId(1)];
        let t = train_dt(&x, &y, 2, &TreeParams::default()).unwrap();
        assert_eq!(t.depth(), 1);
        match &t.nodes()[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert!((threshold - 0.2).abs() < 1e-15);
            }
            other => panic!("expected a split, got {other:?}"),
        }
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(t.distribution(xi)[yi.0], 1.0);
        }
    }

    #[test]
    fn negative_values_sort_below_zero() {
        let x = vec![
            FeatureVector::from_dense(&[-1.0]),
            FeatureVector::from_dense(&[0.0]),
            FeatureVector::from_dense(&[2.0]),
        ];
        let y = vec![LabelId(0), LabelId(1), LabelId(1)];
        let t = train_dt(&x, &y, 2, &TreeParams::default()).unwrap();
        assert_eq!(t.distribution(&FeatureVector::from_dense(&[-0.9]))[0], 1.0);
        assert_eq!(t.distribution(&FeatureVector::from_dense(&[0.0]))[1], 1.0);
    }

    #[test]
    fn depth_and_leaf_limits() {
        let x: Vec<FeatureVector> = (0..8).map(|i| FeatureVector::from_dense(&[i as f64])).collect();
        let y: Vec<LabelId> = (0..8).map(|i| LabelId(i % 2)).collect();
        let t = train_dt(&x, &y, 2, &TreeParams { max_depth: 2, min_leaf: 1 }).unwrap();
        assert!(t.depth() <= 2);
        let t = train_dt(&x, &y, 2, &TreeParams { max_depth: 32, min_leaf: 3 }).unwrap();
        fn leaves_ok(t: &TreeModel) -> bool {
            t.nodes().iter().all(|n| match n {
                Node::Leaf { counts } => counts.iter().sum::<usize>() >= 3,
                Node::Split { .. } => true,
            })
        }
        assert!(leaves_ok(&t));
        assert!(train_dt(&x, &y, 2, &TreeParams { max_depth: 0, min_leaf: 1 }).is_err());
    }
}
