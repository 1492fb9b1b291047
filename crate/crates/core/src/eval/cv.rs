//! Cross-validation protocols.
//!
//! Grouped CV keeps whole groups (e.g. observation-time buckets) together
//! and pools the hold-out predictions, so every row is scored exactly once
//! by a model that never saw its group; the significance is computed on the
//! pooled set. Stratified CV injects label noise into the training folds and
//! scores hold-out folds against clean labels.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::metrics::{auc, f1, tune_threshold_f1};
use crate::eval::noise::{inject_ccn_noise, NoiseSpec};
use crate::eval::report::{mean_std, EvalReport, FoldDiagnostics};
use crate::model::{fit_model_untuned, tune_model, FittedModel, ModelSpec, ThresholdSource};
use crate::rng::{derive_seed, hash_str, rng_for, Stream};
use crate::significance::{tune_threshold, CountPair, ScoredPredictions, ThresholdResult};
use crate::table::{EventTable, Label};

/// Pooled hold-out predictions of a grouped cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedCv {
    /// Labeled rows of the input table, ascending; all vectors align with it.
    pub rows: Vec<usize>,
    pub predictions: ScoredPredictions,
    pub decisions: Vec<bool>,
    pub fold_of_row: Vec<usize>,
    pub folds: Vec<FoldDiagnostics>,
    /// Significance of the pooled decisions.
    pub sigma: f64,
    /// Set when the threshold was tuned on the pooled predictions.
    pub pooled_threshold: Option<ThresholdResult>,
}

/// Places distinct group keys into `n_folds` folds: keys are ordered by a
/// seeded hash and dealt out round-robin, so fold sizes (in groups) differ
/// by at most one.
pub fn assign_group_folds<'a>(
    groups: impl IntoIterator<Item = &'a str>,
    n_folds: usize,
    seed: u64,
) -> Result<HashMap<&'a str, usize>> {
    if n_folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    let distinct: BTreeSet<&str> = groups.into_iter().collect();
    if distinct.len() < n_folds {
        return Err(Error::invalid(format!(
            "{} distinct groups cannot fill {n_folds} folds",
            distinct.len()
        )));
    }
    let mut keyed: Vec<(u64, &str)> = distinct
        .into_iter()
        .map(|g| (derive_seed(seed, Stream::Fold, hash_str(g)), g))
        .collect();
    keyed.sort_unstable();
    Ok(keyed
        .into_iter()
        .enumerate()
        .map(|(i, (_, g))| (g, i % n_folds))
        .collect())
}

struct FoldRun {
    test_rows: Vec<usize>,
    scores: Vec<f64>,
    diag: FoldDiagnostics,
}

fn fit_for_cv(train: &EventTable, spec: &ModelSpec, seed: u64) -> Result<(FittedModel, usize)> {
    let mut model = fit_model_untuned(train, spec, seed)?;
    let mut skipped = 0;
    if spec.threshold_source == ThresholdSource::Oob {
        skipped = tune_model(&mut model, train, spec)?.oob_skipped;
    }
    Ok((model, skipped))
}

/// Grouped cross-validation with pooled hold-out predictions.
pub fn grouped_cv_predict(table: &EventTable, spec: &ModelSpec, n_folds: usize, seed: u64) -> Result<GroupedCv> {
    let rows = table.labeled_rows();
    if rows.is_empty() {
        return Err(Error::invalid("no labeled rows to cross-validate"));
    }
    let fold_of_group = assign_group_folds(rows.iter().map(|&i| table.group(i)), n_folds, seed)?;
    let fold_of_row: Vec<usize> = rows.iter().map(|&i| fold_of_group[table.group(i)]).collect();
    let cfg = &spec.significance;

    let runs: Vec<FoldRun> = (0..n_folds)
        .into_par_iter()
        .map(|f| -> Result<FoldRun> {
            let (mut train_rows, mut test_rows) = (Vec::new(), Vec::new());
            for (&i, &fi) in rows.iter().zip(&fold_of_row) {
                if fi == f {
                    test_rows.push(i);
                } else {
                    train_rows.push(i);
                }
            }
            let train = table.select(&train_rows);
            let (model, oob_skipped) = fit_for_cv(&train, spec, derive_seed(seed, Stream::Fold, f as u64))?;
            let scores = model.score_rows(table, &test_rows)?;
            let threshold = model.threshold();
            let mut decided = CountPair::ZERO;
            for (&i, &s) in test_rows.iter().zip(&scores) {
                if s > threshold {
                    decided += table.counts(&[i]);
                }
            }
            let n_groups = fold_of_group.values().filter(|&&g| g == f).count();
            Ok(FoldRun {
                diag: FoldDiagnostics {
                    fold: f,
                    n_groups,
                    n_train: train_rows.len(),
                    n_test: test_rows.len(),
                    train_counts: train.counts(&(0..train.n_rows()).collect::<Vec<_>>()),
                    test_counts: table.counts(&test_rows),
                    threshold,
                    sigma_test: cfg.sigma(decided),
                    oob_skipped,
                },
                test_rows,
                scores,
            })
        })
        .collect::<Result<_>>()?;

    let position: HashMap<usize, usize> = rows.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    let mut scores = vec![0.0; rows.len()];
    let mut thresholds = vec![0.0; rows.len()];
    let mut folds = Vec::with_capacity(n_folds);
    for run in runs {
        for (&i, &s) in run.test_rows.iter().zip(&run.scores) {
            scores[position[&i]] = s;
            thresholds[position[&i]] = run.diag.threshold;
        }
        folds.push(run.diag);
    }
    let is_on: Vec<bool> = rows.iter().map(|&i| table.region(i).is_on()).collect();
    let predictions = ScoredPredictions::new(scores, is_on)?;

    let pooled_threshold = match (spec.threshold_source, spec.ensemble) {
        (ThresholdSource::Pooled, _) => Some(tune_threshold(&predictions, cfg)),
        _ => None,
    };
    let decisions: Vec<bool> = match pooled_threshold {
        Some(t) => predictions.scores().iter().map(|&s| s > t.theta).collect(),
        None => predictions
            .scores()
            .iter()
            .zip(&thresholds)
            .map(|(&s, &t)| s > t)
            .collect(),
    };
    let mut counts = CountPair::ZERO;
    for (&d, &on) in decisions.iter().zip(predictions.is_on()) {
        if d {
            if on {
                counts.n_on += 1.0;
            } else {
                counts.n_off += 1.0;
            }
        }
    }
    Ok(GroupedCv {
        rows,
        predictions,
        decisions,
        fold_of_row,
        folds,
        sigma: cfg.sigma(counts),
        pooled_threshold,
    })
}

/// Runs grouped CV `repeats` times with derived seeds and summarizes.
/// AUC and F1 against clean labels are added when the table carries them.
pub fn evaluate_grouped(
    table: &EventTable,
    spec: &ModelSpec,
    n_folds: usize,
    repeats: usize,
    seed: u64,
) -> Result<EvalReport> {
    if repeats == 0 {
        return Err(Error::invalid("at least one repeat is required"));
    }
    let mut sigmas = Vec::with_capacity(repeats);
    let (mut aucs, mut f1s) = (Vec::new(), Vec::new());
    let mut first_folds = Vec::new();
    let mut n_rows = 0;
    for r in 0..repeats {
        let cv = grouped_cv_predict(table, spec, n_folds, derive_seed(seed, Stream::Trial, r as u64))?;
        sigmas.push(cv.sigma);
        if let Some(labels) = table.clean_labels() {
            let truth: Vec<bool> = cv.rows.iter().map(|&i| labels[i].is_positive()).collect();
            if let Ok(a) = auc(cv.predictions.scores(), &truth) {
                aucs.push(a);
            }
            f1s.push(f1(&cv.decisions, &truth)?);
        }
        if r == 0 {
            first_folds = cv.folds;
            n_rows = cv.rows.len();
        }
    }
    let (sigma_mean, sigma_std) = mean_std(&sigmas).expect("non-empty");
    Ok(EvalReport {
        protocol: "grouped-cv".into(),
        n_rows,
        n_folds,
        repeats,
        sigma: Some(sigmas[0]),
        sigma_mean: Some(sigma_mean),
        sigma_std: Some(sigma_std),
        sigmas,
        f1: mean_std(&f1s).map(|m| m.0),
        f1_std: mean_std(&f1s).map(|m| m.1),
        auc: mean_std(&aucs).map(|m| m.0),
        folds: first_folds,
        ..Default::default()
    })
}

/// Stratified fold index of every row: each class is shuffled and dealt out
/// round-robin. Errors when a class cannot appear in every fold.
pub fn stratified_folds(labels: &[Label], n_folds: usize, seed: u64) -> Result<Vec<usize>> {
    if n_folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for (c, class) in [Label::Positive, Label::Negative].into_iter().enumerate() {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < n_folds {
            return Err(Error::invalid(format!(
                "class {class} has {} rows, so some of the {n_folds} folds would lack it",
                members.len()
            )));
        }
        members.shuffle(&mut rng_for(seed, Stream::Fold, c as u64));
        for i in members {
            folds[i] = next % n_folds;
            next += 1;
        }
    }
    Ok(folds)
}

struct TrialResult {
    f1: f64,
    f1_oracle: f64,
    auc: Option<f64>,
}

/// Noisy-label stratified cross-validation scored by F1 on clean labels.
///
/// Per trial, noise is injected into the tags of the training folds, the
/// model is fitted on the noisy tags, and the decision threshold is tuned by
/// significance (on OOB predictions by default). The same fitted models are
/// also thresholded by an oracle that maximizes F1 on the clean labels of
/// the same predictions, reported as `f1_clean_oracle`.
pub fn stratified_cv_f1(
    table: &EventTable,
    noise: &NoiseSpec,
    spec: &ModelSpec,
    n_folds: usize,
    n_trials: usize,
    seed: u64,
) -> Result<EvalReport> {
    let labels = table
        .clean_labels()
        .ok_or_else(|| Error::invalid("stratified F1 evaluation needs clean labels"))?;
    if n_trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    let truth: Vec<bool> = labels.iter().map(|l| l.is_positive()).collect();

    let trials: Vec<TrialResult> = (0..n_trials)
        .into_par_iter()
        .map(|r| -> Result<TrialResult> {
            let trial_seed = derive_seed(seed, Stream::Trial, r as u64);
            let folds = stratified_folds(labels, n_folds, trial_seed)?;
            let noisy = table.with_regions(inject_ccn_noise(labels, noise, trial_seed))?;
            let (mut f1s, mut oracle_f1s) = (Vec::new(), Vec::new());
            let (mut pooled_scores, mut pooled_truth) = (Vec::new(), Vec::new());
            for f in 0..n_folds {
                let train_rows: Vec<usize> = (0..table.n_rows()).filter(|&i| folds[i] != f).collect();
                let test_rows: Vec<usize> = (0..table.n_rows()).filter(|&i| folds[i] == f).collect();
                let train = noisy.select(&train_rows);
                let mut model = fit_model_untuned(&train, spec, derive_seed(trial_seed, Stream::Fold, f as u64))?;

                // scores of training rows used for tuning, with their clean labels
                let (tune_scores, tune_truth): (Vec<f64>, Vec<bool>) = match (&mut model, spec.threshold_source) {
                    (FittedModel::Ensemble(ens), ThresholdSource::Oob) => {
                        let oob = ens.oob_scores(&train)?;
                        let tune_truth = oob.rows.iter().map(|&i| truth[train_rows[i]]).collect();
                        if !oob.scores.is_empty() {
                            ens.tune(
                                &ScoredPredictions::new(oob.scores.clone(), oob.is_on)?,
                                &spec.significance,
                            );
                        }
                        (oob.scores, tune_truth)
                    }
                    (model, _) => {
                        let all: Vec<usize> = (0..train.n_rows()).collect();
                        let scores = model.score_rows(&train, &all)?;
                        if let FittedModel::Ensemble(_) = model {
                            tune_model(model, &train, spec)?;
                        }
                        (scores, train_rows.iter().map(|&i| truth[i]).collect())
                    }
                };
                let theta = model.threshold();
                let oracle_theta = if tune_scores.is_empty() {
                    theta
                } else {
                    tune_threshold_f1(&tune_scores, &tune_truth)?.0
                };

                let scores = model.score_rows(table, &test_rows)?;
                let test_truth: Vec<bool> = test_rows.iter().map(|&i| truth[i]).collect();
                let pred: Vec<bool> = scores.iter().map(|&s| s > theta).collect();
                let oracle_pred: Vec<bool> = scores.iter().map(|&s| s > oracle_theta).collect();
                f1s.push(f1(&pred, &test_truth)?);
                oracle_f1s.push(f1(&oracle_pred, &test_truth)?);
                pooled_scores.extend(scores);
                pooled_truth.extend(test_truth);
            }
            Ok(TrialResult {
                f1: mean_std(&f1s).expect("folds").0,
                f1_oracle: mean_std(&oracle_f1s).expect("folds").0,
                auc: auc(&pooled_scores, &pooled_truth).ok(),
            })
        })
        .collect::<Result<_>>()?;

    let f1s: Vec<f64> = trials.iter().map(|t| t.f1).collect();
    let oracle: Vec<f64> = trials.iter().map(|t| t.f1_oracle).collect();
    let aucs: Vec<f64> = trials.iter().filter_map(|t| t.auc).collect();
    let (f1_mean, f1_std) = mean_std(&f1s).expect("trials");
    Ok(EvalReport {
        protocol: "stratified-cv-f1".into(),
        n_rows: table.n_rows(),
        n_folds,
        repeats: n_trials,
        f1: Some(f1_mean),
        f1_std: Some(f1_std),
        f1_clean_oracle: mean_std(&oracle).map(|m| m.0),
        auc: mean_std(&aucs).map(|m| m.0),
        ..Default::default()
    })
}
