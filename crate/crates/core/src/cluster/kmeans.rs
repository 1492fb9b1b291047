//! k-means++ seeding followed by Lloyd iterations.

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{rng_for, Rng, Stream};
use crate::table::EventTable;

pub const DEFAULT_MAX_ITER: usize = 300;

/// Dense row-major point set.
pub(crate) struct Points<'a> {
    pub data: &'a [f64],
    pub dim: usize,
}

impl Points<'_> {
    fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lowest index.
#[inline]
pub(crate) fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(centroid, x);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Fits `k` centroids to all rows and features of `table`.
pub fn fit_kmeans(table: &EventTable, k: usize, seed: u64, max_iter: usize) -> Result<Vec<Vec<f64>>> {
    let rows: Vec<usize> = (0..table.n_rows()).collect();
    let features: Vec<usize> = (0..table.n_features()).collect();
    fit_kmeans_subset(table, &rows, &features, k, seed, max_iter)
}

/// Fits `k` centroids to the given rows, projected onto `features`.
pub fn fit_kmeans_subset(
    table: &EventTable,
    rows: &[usize],
    features: &[usize],
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > rows.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the {} rows to cluster",
            rows.len()
        )));
    }
    if features.is_empty() {
        return Err(Error::invalid("empty feature subset"));
    }
    let mut data = Vec::with_capacity(rows.len() * features.len());
    for &i in rows {
        let row = table.row(i);
        data.extend(features.iter().map(|&j| row[j]));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("non-finite feature value"));
    }
    let points = Points {
        data: &data,
        dim: features.len(),
    };
    let mut rng = rng_for(seed, Stream::KMeans, 0);
    let centroids = init_plus_plus(&points, k, &mut rng);
    Ok(lloyd(&points, centroids, max_iter))
}

/// Greedy k-means++: each new center is the best of `2 + ln k` candidates
/// sampled proportionally to the squared distance to the current centers.
fn init_plus_plus(points: &Points<'_>, k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centroids = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    centroids.push(points.get(first).to_vec());
    let mut closest: Vec<f64> = (0..n).map(|i| sq_dist(points.get(i), &centroids[0])).collect();

    while centroids.len() < k {
        let total: f64 = closest.iter().sum();
        let mut cumulative = Vec::with_capacity(n);
        let mut acc = 0.0;
        for &d in &closest {
            acc += d;
            cumulative.push(acc);
        }
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let candidate = if total > 0.0 {
                let u = rng.random::<f64>() * total;
                cumulative.partition_point(|&c| c <= u).min(n - 1)
            } else {
                rng.random_range(0..n)
            };
            let c = points.get(candidate);
            let updated: Vec<f64> = closest
                .iter()
                .enumerate()
                .map(|(i, &d)| d.min(sq_dist(points.get(i), c)))
                .collect();
            let potential: f64 = updated.iter().sum();
            if best.as_ref().is_none_or(|(p, _, _)| potential < *p) {
                best = Some((potential, candidate, updated));
            }
        }
        let (_, idx, updated) = best.expect("at least one trial");
        centroids.push(points.get(idx).to_vec());
        closest = updated;
    }
    centroids
}

fn lloyd(points: &Points<'_>, mut centroids: Vec<Vec<f64>>, max_iter: usize) -> Vec<Vec<f64>> {
    let n = points.len();
    let dim = points.dim;
    let k = centroids.len();
    let mut labels: Vec<usize> = vec![usize::MAX; n];

    for _ in 0..max_iter {
        let next: Vec<usize> = (0..n)
            .into_par_iter()
            .with_min_len(1024)
            .map(|i| nearest(&centroids, points.get(i)))
            .collect();
        if next == labels {
            break;
        }
        labels = next;

        let mut sums = vec![0.0; k * dim];
        let mut sizes = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            sizes[c] += 1;
            for (s, x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(points.get(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            // empty clusters keep their previous centroid
            if sizes[c] > 0 {
                let size = sizes[c] as f64;
                for (dst, s) in centroids[c].iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                    *dst = s / size;
                }
            }
        }
    }
    centroids
}
