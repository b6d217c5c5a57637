//! Evaluation metrics over a confusion matrix, one-vs-rest ranking AUC, and
//! mean ± sample standard deviation across repeated runs.
//!
//! Predictions may be missing (an LLM answer that could not be resolved to a
//! schema label). Those items are kept in a separate "unassigned" column of
//! the confusion matrix: they count toward the total and against recall and
//! accuracy, but toward no label's precision.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{LabelId, LabelSchema};
use crate::math;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("{truth} gold labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label {0} is not in the {1}-label schema")]
    UnknownLabel(LabelId, usize),
    #[error("confusion matrix is empty")]
    Empty,
    #[error("every class lacks a positive or a negative example; AUC undefined")]
    AllClassesSkipped,
    #[error("score vector for item {0} has the wrong length")]
    ScoreShape(usize),
    #[error("no values to aggregate")]
    NoValues,
}

/// `counts[i][j]`: items with gold label `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    /// Items with gold label `i` and no valid prediction.
    pub unassigned: Vec<u64>,
}

pub fn confusion_matrix(
    truth: &[LabelId],
    pred: &[Option<LabelId>],
    n_labels: usize,
) -> Result<ConfusionMatrix, MetricError> {
    if truth.len() != pred.len() {
        return Err(MetricError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    let mut cm = ConfusionMatrix {
        counts: alloc::vec![alloc::vec![0; n_labels]; n_labels],
        unassigned: alloc::vec![0; n_labels],
    };
    let check = |l: LabelId| {
        if l.0 < n_labels {
            Ok(l.0)
        } else {
            Err(MetricError::UnknownLabel(l, n_labels))
        }
    };
    for (&t, &p) in truth.iter().zip(pred) {
        let t = check(t)?;
        match p {
            Some(p) => cm.counts[t][check(p)?] += 1,
            None => cm.unassigned[t] += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionMatrix {
    pub fn n_labels(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum::<u64>() + self.unassigned.iter().sum::<u64>()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_labels()).map(|i| self.counts[i][i]).sum()
    }

    pub fn n_unassigned(&self) -> u64 {
        self.unassigned.iter().sum()
    }

    fn row_total(&self, i: usize) -> u64 {
        self.counts[i].iter().sum::<u64>() + self.unassigned[i]
    }

    fn col_total(&self, j: usize) -> u64 {
        self.counts.iter().map(|row| row[j]).sum()
    }

    fn non_empty(&self) -> Result<u64, MetricError> {
        match self.total() {
            0 => Err(MetricError::Empty),
            n => Ok(n),
        }
    }

    /// Per-class scores; 0/0 ratios are 0.
    pub fn class_scores(&self) -> Vec<ClassScores> {
        (0..self.n_labels())
            .map(|i| {
                let tp = self.counts[i][i];
                let precision = ratio(tp, self.col_total(i));
                let recall = ratio(tp, self.row_total(i));
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassScores {
                    precision,
                    recall,
                    f1,
                    support: self.row_total(i),
                }
            })
            .collect()
    }

    pub fn accuracy(&self) -> Result<f64, MetricError> {
        let total = self.non_empty()?;
        Ok(self.trace() as f64 / total as f64)
    }

    /// Unweighted mean of per-class F1.
    pub fn macro_f1(&self) -> Result<f64, MetricError> {
        self.non_empty()?;
        let scores = self.class_scores();
        Ok(scores.iter().map(|s| s.f1).sum::<f64>() / scores.len() as f64)
    }

    /// Multi-class Matthews correlation (covariance form); 0 when the
    /// denominator vanishes. Unassigned items act as one extra predicted
    /// column.
    pub fn mcc(&self) -> Result<f64, MetricError> {
        let s = self.non_empty()? as f64;
        let c = self.trace() as f64;
        let k = self.n_labels();
        let t: Vec<f64> = (0..k).map(|i| self.row_total(i) as f64).collect();
        let mut p: Vec<f64> = (0..k).map(|j| self.col_total(j) as f64).collect();
        p.push(self.n_unassigned() as f64);
        let pt: f64 = t.iter().zip(&p).map(|(a, b)| a * b).sum();
        let p2: f64 = p.iter().map(|v| v * v).sum();
        let t2: f64 = t.iter().map(|v| v * v).sum();
        let denom = (s * s - p2) * (s * s - t2);
        if denom <= 0.0 {
            return Ok(0.0);
        }
        Ok((c * s - pt) / math::sqrt(denom))
    }
}

/// Binary ROC AUC in Mann-Whitney form: the probability that a random
/// positive outranks a random negative, ties counting one half. `None` when
/// either side is empty.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks, 1-based, doubled to stay in integers
    let mut rank_sum_x2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let tied_pos = order[i..=j].iter().filter(|&&o| positive[o]).count() as u64;
        // average of ranks i+1..=j+1, times two
        rank_sum_x2 += tied_pos * (i as u64 + j as u64 + 2);
        i = j + 1;
    }
    let n_pos = n_pos as u64;
    let u_x2 = rank_sum_x2 - n_pos * (n_pos + 1);
    Some(u_x2 as f64 / (2 * n_pos * n_neg as u64) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucOutcome {
    pub value: f64,
    /// Classes left out because they had no positive or no negative item.
    pub skipped: Vec<LabelId>,
}

/// One-vs-rest AUC per class, macro-averaged over the classes where it is
/// defined.
pub fn auc_ovr_macro(
    truth: &[LabelId],
    scores: &[Vec<f64>],
    n_labels: usize,
) -> Result<AucOutcome, MetricError> {
    if truth.len() != scores.len() {
        return Err(MetricError::LengthMismatch {
            truth: truth.len(),
            pred: scores.len(),
        });
    }
    if let Some(bad) = scores.iter().position(|s| s.len() != n_labels) {
        return Err(MetricError::ScoreShape(bad));
    }
    let mut skipped = Vec::new();
    let mut total = 0.0;
    let mut included = 0;
    for c in 0..n_labels {
        let column: Vec<f64> = scores.iter().map(|s| s[c]).collect();
        let positive: Vec<bool> = truth.iter().map(|t| t.0 == c).collect();
        match binary_auc(&column, &positive) {
            Some(v) => {
                total += v;
                included += 1;
            }
            None => skipped.push(LabelId(c)),
        }
    }
    if included == 0 {
        return Err(MetricError::AllClassesSkipped);
    }
    Ok(AucOutcome {
        value: total / included as f64,
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub label: String,
    #[serde(flatten)]
    pub scores: ClassScores,
}

/// Everything reported for one predictor on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_items: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub mcc: f64,
    /// Absent for label-only predictors.
    pub auc: Option<f64>,
    pub auc_skipped_labels: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassReport>,
    pub n_invalid_predictions: u64,
}

/// Builds the full report. Pass `scores` only for predictors that emit real
/// probability distributions; label-only predictors get no AUC.
pub fn evaluate(
    truth: &[LabelId],
    pred: &[Option<LabelId>],
    scores: Option<&[Vec<f64>]>,
    schema: &LabelSchema,
) -> Result<EvalReport, MetricError> {
    let cm = confusion_matrix(truth, pred, schema.len())?;
    let (auc, auc_skipped_labels) = match scores {
        None => (None, Vec::new()),
        Some(scores) => match auc_ovr_macro(truth, scores, schema.len()) {
            Ok(outcome) => (
                Some(outcome.value),
                outcome.skipped.iter().map(|&l| String::from(schema.name(l))).collect(),
            ),
            Err(MetricError::AllClassesSkipped) => (None, schema.labels().to_vec()),
            Err(e) => return Err(e),
        },
    };
    let per_class = schema
        .labels()
        .iter()
        .zip(cm.class_scores())
        .map(|(label, scores)| ClassReport {
            label: label.clone(),
            scores,
        })
        .collect();
    Ok(EvalReport {
        n_items: cm.total(),
        accuracy: cm.accuracy()?,
        macro_f1: cm.macro_f1()?,
        mcc: cm.mcc()?,
        auc,
        auc_skipped_labels,
        n_invalid_predictions: cm.n_unassigned(),
        per_class,
        confusion: cm,
    })
}

/// One metric across repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub metric: String,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample (n - 1) standard deviation; 0 for a single run.
    pub std: f64,
}

pub fn aggregate_runs(metric: impl Into<String>, values: &[f64]) -> Result<RunAggregate, MetricError> {
    if values.is_empty() {
        return Err(MetricError::NoValues);
    }
    let n = values.len() as f64;
    if values.iter().all(|&v| v == values[0]) {
        // identical runs: exact mean, exactly zero spread
        return Ok(RunAggregate {
            metric: metric.into(),
            values: values.to_vec(),
            mean: values[0],
            std: 0.0,
        });
    }
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        math::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
    };
    Ok(RunAggregate {
        metric: metric.into(),
        values: values.to_vec(),
        mean,
        std,
    })
}

impl RunAggregate {
    /// `0.5413±0.0099`
    pub fn display(&self) -> String {
        alloc::format!("{:.4}±{:.4}", self.mean, self.std)
    }
}
