//! Classification and agreement metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("length mismatch: {a} vs {b}")));
    }
    Ok(())
}

/// F1 of hard predictions; 0 when precision + recall = 0.
pub fn f1(pred: &[bool], truth: &[bool]) -> Result<f64> {
    same_len(pred.len(), truth.len())?;
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    Ok(f1_from_counts(tp, fp, fneg))
}

fn f1_from_counts(tp: usize, fp: usize, fneg: usize) -> f64 {
    let denom = 2 * tp + fp + fneg;
    if tp == 0 || denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Mid-ranks (1-based); tied values share the average of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn class_sizes(truth: &[bool]) -> Result<(usize, usize)> {
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::domain("AUC and ROC need both classes in the ground truth"));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve via the rank-sum statistic; ties count one half.
pub fn auc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    same_len(scores.len(), truth.len())?;
    let (pos, neg) = class_sizes(truth)?;
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(truth).filter(|(_, &t)| t).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Events with `score >= threshold` are called positive.
    pub threshold: f64,
}

/// The full ROC curve, from (0, 0) at an infinite threshold down to (1, 1)
/// at the smallest score, one point per distinct score.
pub fn roc_points(scores: &[f64], truth: &[bool]) -> Result<Vec<RocPoint>> {
    same_len(scores.len(), truth.len())?;
    let (pos, neg) = class_sizes(truth)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: s,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a ROC curve.
pub fn trapezoid_auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    same_len(a.len(), b.len())?;
    if a.len() < 2 {
        return Err(Error::domain("correlation needs at least two points"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::domain("correlation is undefined for a constant input"));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation of the average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    same_len(a.len(), b.len())?;
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Mean rank per method over datasets, where `scores[dataset][method]` is
/// higher-is-better and the best method of a dataset gets rank 1.
pub fn mean_ranks(scores: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = scores.first() else {
        return Err(Error::invalid("no datasets to rank"));
    };
    let m = first.len();
    let mut totals = vec![0.0; m];
    for row in scores {
        same_len(row.len(), m)?;
        let negated: Vec<f64> = row.iter().map(|x| -x).collect();
        for (t, r) in totals.iter_mut().zip(average_ranks(&negated)) {
            *t += r;
        }
    }
    Ok(totals.into_iter().map(|t| t / scores.len() as f64).collect())
}

/// Threshold maximizing F1 of `score > theta` against `truth`, over the same
/// candidate set as significance tuning. Ties go to the smallest threshold.
pub fn tune_threshold_f1(scores: &[f64], truth: &[bool]) -> Result<(f64, f64)> {
    same_len(scores.len(), truth.len())?;
    if scores.is_empty() {
        return Err(Error::invalid("no scores to tune on"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let pos = truth.iter().filter(|&&t| t).count();
    let (mut tp, mut fp) = (pos, scores.len() - pos);
    let mut best = (crate::significance::below(scores[order[0]]), f1_from_counts(tp, fp, 0));
    let mut i = 0;
    while i < order.len() {
        let v = scores[order[i]];
        while i < order.len() && scores[order[i]] == v {
            if truth[order[i]] {
                tp -= 1;
            } else {
                fp -= 1;
            }
            i += 1;
        }
        let theta = if i < order.len() {
            crate::significance::midpoint(v, scores[order[i]])
        } else {
            crate::significance::above(v)
        };
        let f = f1_from_counts(tp, fp, pos - tp);
        if f > best.1 {
            best = (theta, f);
        }
    }
    Ok(best)
}
