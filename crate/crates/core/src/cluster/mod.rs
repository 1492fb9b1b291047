//! The k-means detector: cluster every event, then label whole clusters.

mod assignment;
mod kmeans;

pub use assignment::{
    assignment_sigma, exhaustive_assignment, optimize_assignment, selected_counts, MAX_EXHAUSTIVE_CLUSTERS,
};
pub use kmeans::{fit_kmeans, fit_kmeans_subset, DEFAULT_MAX_ITER};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::significance::{CountPair, SignificanceConfig};
use crate::table::{EventTable, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iter: usize,
}

impl KMeansParams {
    pub fn new(k: usize) -> Self {
        KMeansParams {
            k,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Fitted centroids together with the cluster-to-class assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDetector {
    centroids: Vec<Vec<f64>>,
    assignment: Vec<bool>,
    /// Sorted indices into the full feature vector the centroids live in.
    feature_subset: Vec<usize>,
    n_features: usize,
    seed: u64,
}

impl ClusterDetector {
    /// Fits a detector on every labeled row and feature of `table`.
    pub fn fit(table: &EventTable, params: &KMeansParams, cfg: &SignificanceConfig, seed: u64) -> Result<Self> {
        let rows = table.labeled_rows();
        let features: Vec<usize> = (0..table.n_features()).collect();
        Self::fit_rows(table, &rows, features, params, cfg, seed)
    }

    /// Fits on the given rows (duplicates allowed) restricted to `feature_subset`.
    /// Unlabeled rows are ignored.
    pub fn fit_rows(
        table: &EventTable,
        rows: &[usize],
        mut feature_subset: Vec<usize>,
        params: &KMeansParams,
        cfg: &SignificanceConfig,
        seed: u64,
    ) -> Result<Self> {
        feature_subset.sort_unstable();
        feature_subset.dedup();
        if feature_subset.iter().any(|&j| j >= table.n_features()) {
            return Err(Error::invalid("feature subset index out of range"));
        }
        let rows: Vec<usize> = rows.iter().copied().filter(|&i| table.region(i).is_labeled()).collect();
        let centroids = fit_kmeans_subset(table, &rows, &feature_subset, params.k, seed, params.max_iter)?;
        let counts = cluster_counts_rows(table, &rows, &centroids, &feature_subset);
        let assignment = optimize_assignment(&counts, cfg);
        Ok(ClusterDetector {
            centroids,
            assignment,
            feature_subset,
            n_features: table.n_features(),
            seed,
        })
    }

    /// Assembles a detector from parts; used by tests and deserialization checks.
    pub fn from_parts(
        centroids: Vec<Vec<f64>>,
        assignment: Vec<bool>,
        feature_subset: Vec<usize>,
        n_features: usize,
        seed: u64,
    ) -> Result<Self> {
        let det = ClusterDetector {
            centroids,
            assignment,
            feature_subset,
            n_features,
            seed,
        };
        det.validate()?;
        Ok(det)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let k = self.centroids.len();
        if k == 0 || k != self.assignment.len() {
            return Err(Error::invalid("centroid and assignment counts differ or are zero"));
        }
        if self.feature_subset.is_empty()
            || self.feature_subset.windows(2).any(|w| w[0] >= w[1])
            || self.feature_subset.iter().any(|&j| j >= self.n_features)
        {
            return Err(Error::invalid("feature subset must be sorted, unique and in range"));
        }
        if self.centroids.iter().any(|c| c.len() != self.feature_subset.len()) {
            return Err(Error::invalid(
                "centroid dimensionality differs from the feature subset",
            ));
        }
        Ok(())
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn assignment(&self) -> &[bool] {
        &self.assignment
    }

    pub fn feature_subset(&self) -> &[usize] {
        &self.feature_subset
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Cluster index of a full feature vector.
    pub fn cluster_of(&self, features: &[f64]) -> Result<usize> {
        if features.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: features.len(),
            });
        }
        Ok(self.cluster_unchecked(features))
    }

    #[inline]
    fn cluster_unchecked(&self, features: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, centroid) in self.centroids.iter().enumerate() {
            let d: f64 = centroid
                .iter()
                .zip(&self.feature_subset)
                .map(|(m, &j)| (features[j] - m) * (features[j] - m))
                .sum();
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        best
    }

    /// Class of the nearest cluster.
    pub fn predict(&self, features: &[f64]) -> Result<bool> {
        Ok(self.assignment[self.cluster_of(features)?])
    }

    #[inline]
    pub(crate) fn predict_unchecked(&self, features: &[f64]) -> bool {
        self.assignment[self.cluster_unchecked(features)]
    }
}

/// Per-cluster On/Off tallies over every labeled row of `table`.
///
/// `centroids` live in the space of `feature_subset`.
pub fn cluster_counts(table: &EventTable, centroids: &[Vec<f64>], feature_subset: &[usize]) -> Vec<CountPair> {
    cluster_counts_rows(
        table,
        &(0..table.n_rows()).collect::<Vec<_>>(),
        centroids,
        feature_subset,
    )
}

pub(crate) fn cluster_counts_rows(
    table: &EventTable,
    rows: &[usize],
    centroids: &[Vec<f64>],
    feature_subset: &[usize],
) -> Vec<CountPair> {
    let mut counts = vec![CountPair::ZERO; centroids.len()];
    let mut projected = vec![0.0; feature_subset.len()];
    for &i in rows {
        let region = table.region(i);
        if !region.is_labeled() {
            continue;
        }
        let row = table.row(i);
        for (p, &j) in projected.iter_mut().zip(feature_subset) {
            *p = row[j];
        }
        let c = kmeans::nearest(centroids, &projected);
        match region {
            Region::On => counts[c].n_on += 1.0,
            _ => counts[c].n_off += 1.0,
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob_table() -> EventTable {
        // blob A near (0,0): 30 On, 10 Off; blob B near (10,10): 5 On, 20 Off
        let mut rows = Vec::new();
        let mut regions = Vec::new();
        let mut push = |cx: f64, n: usize, region: Region| {
            for i in 0..n {
                let jitter = (i as f64) * 0.001;
                rows.push(vec![cx + jitter, cx - jitter]);
                regions.push(region);
            }
        };
        push(0.0, 30, Region::On);
        push(0.0, 10, Region::Off(0));
        push(10.0, 5, Region::On);
        push(10.0, 20, Region::Off(1));
        EventTable::from_rows(&rows, regions).unwrap()
    }

    #[test]
    fn counts_single_cluster() {
        let rows = vec![vec![0.0]; 8];
        let mut regions = vec![Region::On; 3];
        regions.extend(vec![Region::Off(0); 5]);
        let t = EventTable::from_rows(&rows, regions).unwrap();
        assert_eq!(
            cluster_counts(&t, &[vec![0.0]], &[0]),
            vec![CountPair::new(3.0, 5.0).unwrap()]
        );
    }

    #[test]
    fn equidistant_rows_go_to_cluster_zero() {
        let t = EventTable::from_rows(&[vec![0.0], vec![0.0]], vec![Region::On, Region::Off(0)]).unwrap();
        let counts = cluster_counts(&t, &[vec![-1.0], vec![1.0]], &[0]);
        assert_eq!(counts, vec![CountPair::new(1.0, 1.0).unwrap(), CountPair::ZERO]);
    }

    #[test]
    fn blob_counts_and_prediction() {
        let t = blob_table();
        let centroids = vec![vec![0.0, 0.0], vec![10.0, 10.0]];
        let counts = cluster_counts(&t, &centroids, &[0, 1]);
        assert_eq!(
            counts,
            vec![CountPair::new(30.0, 10.0).unwrap(), CountPair::new(5.0, 20.0).unwrap()]
        );
        let cfg = SignificanceConfig::new(1.0).unwrap();
        let det = ClusterDetector::fit(&t, &KMeansParams::new(2), &cfg, 0).unwrap();
        assert!(det.predict(&[0.01, -0.01]).unwrap());
        assert!(!det.predict(&[10.0, 10.0]).unwrap());
        assert!(det.predict(&[1.0]).is_err());
    }

    #[test]
    fn predict_tie_and_exact_hit() {
        let det = ClusterDetector::from_parts(
            vec![vec![0.0], vec![2.0], vec![5.0]],
            vec![false, false, true],
            vec![0],
            1,
            0,
        )
        .unwrap();
        assert!(det.predict(&[5.0]).unwrap());
        let det = ClusterDetector::from_parts(vec![vec![-1.0], vec![1.0]], vec![true, false], vec![0], 1, 0).unwrap();
        assert!(det.predict(&[0.0]).unwrap());
    }

    #[test]
    fn counts_sum_to_totals() {
        let t = blob_table();
        let totals = t.counts(&(0..t.n_rows()).collect::<Vec<_>>());
        for centroids in [
            vec![vec![3.0, 3.0]],
            vec![vec![0.0, 1.0], vec![4.0, 4.0], vec![9.0, 0.0]],
        ] {
            let sum = cluster_counts(&t, &centroids, &[0, 1])
                .into_iter()
                .fold(CountPair::ZERO, |a, b| a + b);
            assert_eq!(sum, totals);
        }
    }
}
