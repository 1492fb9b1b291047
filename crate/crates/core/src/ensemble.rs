//! Bagged ensembles of cluster detectors or significance trees.
//!
//! Each member is trained on a bootstrap sample of the labeled rows. Cluster
//! members also see a random feature subset fixed per member; tree members
//! draw `floor(sqrt(d))` candidate features at every split. The ensemble
//! score of an event is the mean of the members' hard 0/1 outputs.

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterDetector, KMeansParams};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for, Stream};
use crate::significance::{tune_threshold, ScoredPredictions, SignificanceConfig, ThresholdResult};
use crate::table::EventTable;
use crate::tree::{Criterion, FeatureOrder, SigTree, TreeParams};

/// Hyperparameters of a base model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BaseParams {
    KMeans {
        k: usize,
        max_iter: usize,
        /// Features per ensemble member; `ceil(d / 2)` when `None`.
        /// Ignored by single detectors, which use every feature.
        feature_subset_size: Option<usize>,
    },
    Tree {
        criterion: Criterion,
        max_depth: usize,
    },
}

impl BaseParams {
    pub fn kmeans(k: usize) -> Self {
        BaseParams::KMeans {
            k,
            max_iter: crate::cluster::DEFAULT_MAX_ITER,
            feature_subset_size: None,
        }
    }

    pub fn tree(criterion: Criterion, max_depth: usize) -> Self {
        BaseParams::Tree { criterion, max_depth }
    }

    pub fn kind(&self) -> BaseKind {
        match self {
            BaseParams::KMeans { .. } => BaseKind::Cluster,
            BaseParams::Tree { .. } => BaseKind::Tree,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseKind {
    Cluster,
    Tree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub base: BaseParams,
    pub n_members: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Member {
    Cluster(ClusterDetector),
    Tree(SigTree),
}

impl Member {
    #[inline]
    fn predict_unchecked(&self, x: &[f64]) -> bool {
        match self {
            Member::Cluster(c) => c.predict_unchecked(x),
            Member::Tree(t) => t.predict_unchecked(x),
        }
    }

    fn n_features(&self) -> usize {
        match self {
            Member::Cluster(c) => c.n_features(),
            Member::Tree(t) => t.n_features(),
        }
    }
}

/// Membership bit set over the rows of the training table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowSet {
    len: usize,
    bits: Vec<u64>,
}

impl RowSet {
    pub fn new(len: usize) -> Self {
        RowSet {
            len,
            bits: vec![0; len.div_ceil(64)],
        }
    }

    pub fn insert(&mut self, i: usize) {
        self.bits[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }
}

impl Serialize for RowSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let hex: String = self.bits.iter().map(|w| format!("{w:016x}")).collect();
        (self.len, hex).serialize(s)
    }
}

impl<'de> Deserialize<'de> for RowSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let (len, hex): (usize, String) = Deserialize::deserialize(d)?;
        if hex.len() != len.div_ceil(64) * 16 || !hex.is_ascii() {
            return Err(D::Error::custom("row set length does not match its bit string"));
        }
        let bits = (0..hex.len() / 16)
            .map(|w| u64::from_str_radix(&hex[w * 16..(w + 1) * 16], 16))
            .collect::<std::result::Result<Vec<u64>, _>>()
            .map_err(D::Error::custom)?;
        if len % 64 != 0 && bits.last().is_some_and(|w| w >> (len % 64) != 0) {
            return Err(D::Error::custom("row set has bits beyond its length"));
        }
        Ok(RowSet { len, bits })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    members: Vec<Member>,
    /// Rows drawn into each member's bootstrap sample.
    bootstrap: Vec<RowSet>,
    threshold: f64,
    base: BaseParams,
    seed: u64,
    n_features: usize,
}

/// Size of the per-split feature sample of forest members.
pub fn forest_features(d: usize) -> usize {
    ((d as f64).sqrt().floor() as usize).max(1)
}

/// Default per-member feature count of k-means ensembles.
pub fn kmeans_ensemble_features(d: usize) -> usize {
    d.div_ceil(2).max(1)
}

/// Fits `params.n_members` members on bootstrap samples of the labeled rows.
/// The threshold starts at 0.5 (majority vote) until [`EnsembleModel::tune`].
pub fn fit_ensemble(
    table: &EventTable,
    params: &EnsembleParams,
    cfg: &SignificanceConfig,
    seed: u64,
) -> Result<EnsembleModel> {
    if params.n_members == 0 {
        return Err(Error::invalid("an ensemble needs at least one member"));
    }
    let labeled = table.labeled_rows();
    if labeled.is_empty() {
        return Err(Error::invalid("cannot fit an ensemble without labeled rows"));
    }
    let n = labeled.len();
    let d = table.n_features();
    let order = matches!(params.base, BaseParams::Tree { .. }).then(|| FeatureOrder::new(table));

    let fitted: Vec<(Member, RowSet)> = (0..params.n_members)
        .into_par_iter()
        .map(|t| -> Result<(Member, RowSet)> {
            let mut rng = rng_for(seed, Stream::Bootstrap, t as u64);
            let draws: Vec<usize> = (0..n).map(|_| labeled[rng.random_range(0..n)]).collect();
            let mut members = RowSet::new(table.n_rows());
            for &i in &draws {
                members.insert(i);
            }
            let member_seed = derive_seed(seed, Stream::Member, t as u64);
            let member = match params.base {
                BaseParams::KMeans {
                    k,
                    max_iter,
                    feature_subset_size,
                } => {
                    let m = feature_subset_size
                        .unwrap_or_else(|| kmeans_ensemble_features(d))
                        .clamp(1, d);
                    let mut feature_rng = rng_for(seed, Stream::Features, t as u64);
                    let subset = sample(&mut feature_rng, d, m).into_vec();
                    Member::Cluster(ClusterDetector::fit_rows(
                        table,
                        &draws,
                        subset,
                        &KMeansParams { k, max_iter },
                        cfg,
                        member_seed,
                    )?)
                }
                BaseParams::Tree { criterion, max_depth } => {
                    let tree_params = TreeParams {
                        criterion,
                        max_depth,
                        feature_subsample: Some(forest_features(d)),
                    };
                    Member::Tree(SigTree::fit_rows_presorted(
                        table,
                        &draws,
                        order.as_ref().expect("tree ensembles presort"),
                        cfg,
                        tree_params,
                        member_seed,
                    )?)
                }
            };
            Ok((member, members))
        })
        .collect::<Result<_>>()?;

    let (members, bootstrap) = fitted.into_iter().unzip();
    Ok(EnsembleModel {
        members,
        bootstrap,
        threshold: 0.5,
        base: params.base,
        seed,
        n_features: d,
    })
}

/// Out-of-bag scores for the rows of the training table.
#[derive(Debug, Clone, PartialEq)]
pub struct OobScores {
    pub rows: Vec<usize>,
    pub scores: Vec<f64>,
    pub is_on: Vec<bool>,
    /// Labeled rows that every member saw during training.
    pub skipped: usize,
}

impl OobScores {
    pub fn predictions(&self) -> Result<ScoredPredictions> {
        ScoredPredictions::new(self.scores.clone(), self.is_on.clone())
    }
}

impl EnsembleModel {
    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn bootstrap(&self) -> &[RowSet] {
        &self.bootstrap
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn set_threshold(&mut self, theta: f64) {
        self.threshold = theta;
    }

    pub fn base(&self) -> BaseParams {
        self.base
    }

    pub fn base_kind(&self) -> BaseKind {
        self.base.kind()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Mean of the members' 0/1 outputs.
    pub fn predict_score(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: features.len(),
            });
        }
        Ok(self.score_unchecked(features))
    }

    #[inline]
    pub(crate) fn score_unchecked(&self, features: &[f64]) -> f64 {
        let positive = self.members.iter().filter(|m| m.predict_unchecked(features)).count();
        positive as f64 / self.members.len() as f64
    }

    /// Member outputs for one feature vector.
    pub fn member_outputs(&self, features: &[f64]) -> Result<Vec<bool>> {
        self.predict_score(features)?;
        Ok(self.members.iter().map(|m| m.predict_unchecked(features)).collect())
    }

    /// Scores every labeled row of `table` (which must be the training
    /// table) using only members whose bootstrap sample excluded that row.
    pub fn oob_scores(&self, table: &EventTable) -> Result<OobScores> {
        if table.n_features() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: table.n_features(),
            });
        }
        if self.bootstrap.iter().any(|b| b.len() != table.n_rows()) {
            return Err(Error::invalid("table is not the ensemble's training table"));
        }
        let per_row: Vec<Option<(usize, f64, bool)>> = (0..table.n_rows())
            .into_par_iter()
            .with_min_len(256)
            .map(|i| {
                let region = table.region(i);
                if !region.is_labeled() {
                    return None;
                }
                let x = table.row(i);
                let (mut used, mut positive) = (0usize, 0usize);
                for (m, b) in self.members.iter().zip(&self.bootstrap) {
                    if !b.contains(i) {
                        used += 1;
                        positive += usize::from(m.predict_unchecked(x));
                    }
                }
                Some((
                    i,
                    if used == 0 {
                        f64::NAN
                    } else {
                        positive as f64 / used as f64
                    },
                    region.is_on(),
                ))
            })
            .collect();

        let mut out = OobScores {
            rows: Vec::new(),
            scores: Vec::new(),
            is_on: Vec::new(),
            skipped: 0,
        };
        for (i, score, on) in per_row.into_iter().flatten() {
            if score.is_nan() {
                out.skipped += 1;
            } else {
                out.rows.push(i);
                out.scores.push(score);
                out.is_on.push(on);
            }
        }
        Ok(out)
    }

    /// Sets the decision threshold by maximizing the significance of `preds`.
    pub fn tune(&mut self, preds: &ScoredPredictions, cfg: &SignificanceConfig) -> ThresholdResult {
        let result = tune_threshold(preds, cfg);
        self.threshold = result.theta;
        result
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.members.is_empty() || self.members.len() != self.bootstrap.len() {
            return Err(Error::invalid(
                "ensemble member and bootstrap counts differ or are zero",
            ));
        }
        if !self.threshold.is_finite() {
            return Err(Error::invalid("ensemble threshold is not finite"));
        }
        for m in &self.members {
            if m.n_features() != self.n_features {
                return Err(Error::invalid("member feature count differs from the ensemble"));
            }
            let ok = matches!(
                (m, self.base.kind()),
                (Member::Cluster(_), BaseKind::Cluster) | (Member::Tree(_), BaseKind::Tree)
            );
            if !ok {
                return Err(Error::invalid("member kind differs from the ensemble base kind"));
            }
            match m {
                Member::Cluster(c) => c.validate()?,
                Member::Tree(t) => t.validate()?,
            }
        }
        Ok(())
    }
}
