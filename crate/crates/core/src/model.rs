//! A uniform front over single detectors and ensembles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterDetector, KMeansParams};
use crate::ensemble::{fit_ensemble, BaseParams, EnsembleModel, EnsembleParams};
use crate::error::{Error, Result};
use crate::significance::{ScoredPredictions, SignificanceConfig, ThresholdResult};
use crate::table::EventTable;
use crate::tree::{SigTree, TreeParams};

/// Which predictions an ensemble's decision threshold is tuned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdSource {
    /// Out-of-bag predictions of the training rows.
    #[default]
    Oob,
    /// Full-data predictions: in-sample after a plain fit, or the pooled
    /// hold-out predictions under cross-validation.
    Pooled,
}

/// Everything needed to fit a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub base: BaseParams,
    /// Number of ensemble members; a single detector when `None`.
    pub ensemble: Option<usize>,
    pub threshold_source: ThresholdSource,
    pub significance: SignificanceConfig,
}

impl ModelSpec {
    pub fn single(base: BaseParams, significance: SignificanceConfig) -> Self {
        ModelSpec {
            base,
            ensemble: None,
            threshold_source: ThresholdSource::Oob,
            significance,
        }
    }

    pub fn ensemble(base: BaseParams, n_members: usize, significance: SignificanceConfig) -> Self {
        ModelSpec {
            base,
            ensemble: Some(n_members),
            threshold_source: ThresholdSource::Oob,
            significance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FittedModel {
    Cluster(ClusterDetector),
    Tree(SigTree),
    Ensemble(EnsembleModel),
}

/// Threshold applied to the 0/1 output of a single detector.
pub const SINGLE_THRESHOLD: f64 = 0.5;

/// Fits the model and, for ensembles, tunes the threshold on the source
/// named by the spec (OOB or in-sample predictions of `table`).
pub fn fit_model(table: &EventTable, spec: &ModelSpec, seed: u64) -> Result<FittedModel> {
    let mut model = fit_model_untuned(table, spec, seed)?;
    tune_model(&mut model, table, spec)?;
    Ok(model)
}

/// Outcome of [`tune_model`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TuneInfo {
    pub result: Option<ThresholdResult>,
    /// Training rows that no out-of-bag member could score.
    pub oob_skipped: usize,
}

/// Tunes an ensemble's threshold on its training table `table`. Single
/// detectors are left untouched, as is an ensemble without any OOB rows.
pub fn tune_model(model: &mut FittedModel, table: &EventTable, spec: &ModelSpec) -> Result<TuneInfo> {
    let FittedModel::Ensemble(ens) = model else {
        return Ok(TuneInfo::default());
    };
    let (scores, is_on, skipped) = match spec.threshold_source {
        ThresholdSource::Oob => {
            let oob = ens.oob_scores(table)?;
            (oob.scores, oob.is_on, oob.skipped)
        }
        ThresholdSource::Pooled => {
            let rows = table.labeled_rows();
            let scores = rows.par_iter().map(|&i| ens.score_unchecked(table.row(i))).collect();
            (scores, rows.iter().map(|&i| table.region(i).is_on()).collect(), 0)
        }
    };
    if scores.is_empty() {
        return Ok(TuneInfo {
            result: None,
            oob_skipped: skipped,
        });
    }
    let preds = ScoredPredictions::new(scores, is_on)?;
    Ok(TuneInfo {
        result: Some(ens.tune(&preds, &spec.significance)),
        oob_skipped: skipped,
    })
}

/// Fits without threshold tuning; ensembles keep the majority-vote threshold.
pub fn fit_model_untuned(table: &EventTable, spec: &ModelSpec, seed: u64) -> Result<FittedModel> {
    let cfg = &spec.significance;
    Ok(match spec.ensemble {
        Some(n_members) => FittedModel::Ensemble(fit_ensemble(
            table,
            &EnsembleParams {
                base: spec.base,
                n_members,
            },
            cfg,
            seed,
        )?),
        None => match spec.base {
            BaseParams::KMeans { k, max_iter, .. } => {
                FittedModel::Cluster(ClusterDetector::fit(table, &KMeansParams { k, max_iter }, cfg, seed)?)
            }
            BaseParams::Tree { criterion, max_depth } => {
                FittedModel::Tree(SigTree::fit(table, cfg, TreeParams::new(criterion, max_depth), seed)?)
            }
        },
    })
}

impl FittedModel {
    pub fn n_features(&self) -> usize {
        match self {
            FittedModel::Cluster(c) => c.n_features(),
            FittedModel::Tree(t) => t.n_features(),
            FittedModel::Ensemble(e) => e.n_features(),
        }
    }

    /// Gamma score in `[0, 1]`: the 0/1 output of a single detector or the
    /// member mean of an ensemble.
    pub fn score(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: features.len(),
            });
        }
        Ok(self.score_unchecked(features))
    }

    #[inline]
    pub(crate) fn score_unchecked(&self, features: &[f64]) -> f64 {
        let hard = |b: bool| if b { 1.0 } else { 0.0 };
        match self {
            FittedModel::Cluster(c) => hard(c.predict_unchecked(features)),
            FittedModel::Tree(t) => hard(t.predict_unchecked(features)),
            FittedModel::Ensemble(e) => e.score_unchecked(features),
        }
    }

    pub fn threshold(&self) -> f64 {
        match self {
            FittedModel::Ensemble(e) => e.threshold(),
            _ => SINGLE_THRESHOLD,
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<bool> {
        Ok(self.score(features)? > self.threshold())
    }

    /// Scores of the given rows of `table`, in order.
    pub fn score_rows(&self, table: &EventTable, rows: &[usize]) -> Result<Vec<f64>> {
        if table.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: table.n_features(),
            });
        }
        Ok(rows
            .par_iter()
            .with_min_len(256)
            .map(|&i| self.score_unchecked(table.row(i)))
            .collect())
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match self {
            FittedModel::Cluster(c) => c.validate(),
            FittedModel::Tree(t) => t.validate(),
            FittedModel::Ensemble(e) => e.validate(),
        }
    }
}
