//! Evaluation metrics: Macro/Micro F1, accuracy, and mean reciprocal rank.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-class confusion counts and derived scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub class: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Aggregate evaluation report. `mrr` is present only when per-class scores
/// were available (single-label evaluation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mrr: Option<f64>,
    pub per_class: Vec<ClassScores>,
}

fn safe_ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Macro F1, Micro F1, and the per-class table for (multi-)label sets.
///
/// Per class: precision `TP/(TP+FP)`, recall `TP/(TP+FN)`, F1 their
/// harmonic mean with `0/0` defined as 0. Macro averages per-class F1 over
/// all `n_classes` (classes absent from predictions and truth contribute
/// 0); micro pools the counts first.
pub fn f1_scores(
    predicted: &[Vec<usize>],
    truth: &[Vec<usize>],
    n_classes: usize,
) -> Result<(f64, f64, Vec<ClassScores>)> {
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} ground-truth rows",
            predicted.len(),
            truth.len()
        )));
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fneg = vec![0usize; n_classes];
    for (pred, gold) in predicted.iter().zip(truth) {
        for set in [pred, gold] {
            if let Some(&bad) = set.iter().find(|&&c| c >= n_classes) {
                return Err(Error::InvalidLabel { label: bad, n_classes });
            }
        }
        for &c in pred {
            if gold.contains(&c) {
                tp[c] += 1;
            } else {
                fp[c] += 1;
            }
        }
        for &c in gold {
            if !pred.contains(&c) {
                fneg[c] += 1;
            }
        }
    }
    let per_class: Vec<ClassScores> = (0..n_classes)
        .map(|c| {
            let precision = safe_ratio(tp[c], tp[c] + fp[c]);
            let recall = safe_ratio(tp[c], tp[c] + fneg[c]);
            ClassScores {
                class: c,
                true_positives: tp[c],
                false_positives: fp[c],
                false_negatives: fneg[c],
                precision,
                recall,
                f1: f1_from(precision, recall),
            }
        })
        .collect();
    let macro_f1 = per_class.iter().map(|s| s.f1).sum::<f64>() / n_classes.max(1) as f64;
    let total_tp: usize = tp.iter().sum();
    let total_fp: usize = fp.iter().sum();
    let total_fn: usize = fneg.iter().sum();
    let micro_p = safe_ratio(total_tp, total_tp + total_fp);
    let micro_r = safe_ratio(total_tp, total_tp + total_fn);
    Ok((macro_f1, f1_from(micro_p, micro_r), per_class))
}

/// Mean reciprocal rank of the true class under each row's scores.
///
/// `rank_i` is 1 plus the number of classes scoring strictly higher than
/// the true class, plus the number of equal-scoring classes with a lower
/// index (lower index wins the earlier rank on ties).
pub fn mrr(scores: &[Vec<f64>], truth: &[usize]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Data("mrr needs at least one row".into()));
    }
    if scores.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} score rows vs {} labels",
            scores.len(),
            truth.len()
        )));
    }
    let mut total = 0.0;
    for (row, &y) in scores.iter().zip(truth) {
        if y >= row.len() {
            return Err(Error::InvalidLabel { label: y, n_classes: row.len() });
        }
        let target = row[y];
        let mut rank = 1usize;
        for (c, &s) in row.iter().enumerate() {
            if s > target || (s == target && c < y) {
                rank += 1;
            }
        }
        total += 1.0 / rank as f64;
    }
    Ok(total / scores.len() as f64)
}

/// Fraction of exact matches.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Data("accuracy needs at least one example".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Full report for single-label predictions with per-class probabilities.
pub fn evaluate_single_label(
    probabilities: &[Vec<f64>],
    predicted: &[usize],
    truth: &[usize],
    n_classes: usize,
) -> Result<EvalReport> {
    let acc = accuracy(predicted, truth)?;
    let pred_sets: Vec<Vec<usize>> = predicted.iter().map(|&c| vec![c]).collect();
    let truth_sets: Vec<Vec<usize>> = truth.iter().map(|&c| vec![c]).collect();
    let (macro_f1, micro_f1, per_class) = f1_scores(&pred_sets, &truth_sets, n_classes)?;
    let mrr_value = mrr(probabilities, truth)?;
    Ok(EvalReport { accuracy: acc, macro_f1, micro_f1, mrr: Some(mrr_value), per_class })
}

/// Report for multi-label predictions; accuracy is exact set match and MRR
/// is omitted.
pub fn evaluate_multi_label(
    predicted: &[Vec<usize>],
    truth: &[Vec<usize>],
    n_classes: usize,
) -> Result<EvalReport> {
    if predicted.is_empty() {
        return Err(Error::Data("evaluation needs at least one example".into()));
    }
    let (macro_f1, micro_f1, per_class) = f1_scores(predicted, truth, n_classes)?;
    let exact = predicted
        .iter()
        .zip(truth)
        .filter(|(a, b)| {
            let mut x = (*a).clone();
            let mut y = (*b).clone();
            x.sort_unstable();
            y.sort_unstable();
            x == y
        })
        .count();
    Ok(EvalReport {
        accuracy: exact as f64 / predicted.len() as f64,
        macro_f1,
        micro_f1,
        mrr: None,
        per_class,
    })
}
