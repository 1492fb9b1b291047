//! Synthetic data generators for tests, benchmarks and sanity experiments.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::rng::{rng_for, Stream};
use crate::table::{EventTable, Label, Region};

/// Wobble-mode observation: one On region and `n_off_regions` equal-area
/// Off regions observed simultaneously.
///
/// Hadrons are spread uniformly over all regions. Gammas land in the On
/// region with `on_excess` times the rate of each individual Off region.
/// Gamma features are shifted by `separation` (Euclidean distance between
/// the class means) relative to standard normal hadrons.
#[derive(Debug, Clone, PartialEq)]
pub struct WobbleConfig {
    pub n_rows: usize,
    pub n_features: usize,
    pub n_off_regions: u32,
    pub gamma_fraction: f64,
    pub on_excess: f64,
    pub separation: f64,
    /// Number of observation-time buckets used as group keys.
    pub n_groups: usize,
}

impl WobbleConfig {
    /// A detectable source: 5% gammas with 3x the gamma rate in the On region.
    pub fn signal(n_rows: usize) -> Self {
        WobbleConfig {
            n_rows,
            n_features: 4,
            n_off_regions: 5,
            gamma_fraction: 0.05,
            on_excess: 3.0,
            separation: 4.0,
            n_groups: 24,
        }
    }

    /// Every row drawn from one distribution; region tags carry no signal.
    pub fn no_signal(n_rows: usize) -> Self {
        WobbleConfig {
            gamma_fraction: 0.0,
            on_excess: 1.0,
            ..Self::signal(n_rows)
        }
    }

    /// `alpha = A_on / A_off` for equal-area regions.
    pub fn alpha(&self) -> f64 {
        1.0 / f64::from(self.n_off_regions)
    }
}

pub fn wobble_table(cfg: &WobbleConfig, seed: u64) -> EventTable {
    let mut rng = rng_for(seed, Stream::Synth, 1);
    let d = cfg.n_features;
    let shift = cfg.separation / (d as f64).sqrt();
    let n_regions = cfg.n_off_regions + 1;
    let p_on_gamma = cfg.on_excess / (cfg.on_excess + f64::from(cfg.n_off_regions));

    let mut features = Vec::with_capacity(cfg.n_rows * d);
    let mut regions = Vec::with_capacity(cfg.n_rows);
    let mut groups = Vec::with_capacity(cfg.n_rows);
    let mut labels = Vec::with_capacity(cfg.n_rows);
    for _ in 0..cfg.n_rows {
        let gamma = rng.random::<f64>() < cfg.gamma_fraction;
        let region = if gamma {
            if rng.random::<f64>() < p_on_gamma {
                Region::On
            } else {
                Region::Off(rng.random_range(0..cfg.n_off_regions))
            }
        } else {
            match rng.random_range(0..n_regions) {
                0 => Region::On,
                k => Region::Off(k - 1),
            }
        };
        for _ in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            features.push(if gamma { z + shift } else { z });
        }
        regions.push(region);
        groups.push(format!("t{:02}", rng.random_range(0..cfg.n_groups.max(1))));
        labels.push(if gamma { Label::Positive } else { Label::Negative });
    }
    let names = (0..d).map(|j| format!("f{j}")).collect();
    EventTable::new(names, features, regions, Some(groups), Some(labels)).expect("generator produces a valid table")
}

/// Imbalanced two-Gaussian data with clean labels. Region tags mirror the
/// clean labels (On for positives, `Off(0)` for negatives).
pub fn two_gaussians(
    n_rows: usize,
    positive_fraction: f64,
    separation: f64,
    n_features: usize,
    seed: u64,
) -> EventTable {
    let mut rng = rng_for(seed, Stream::Synth, 2);
    let shift = separation / (n_features as f64).sqrt();
    let mut features = Vec::with_capacity(n_rows * n_features);
    let mut labels = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let positive = rng.random::<f64>() < positive_fraction;
        for _ in 0..n_features {
            let z: f64 = StandardNormal.sample(&mut rng);
            features.push(if positive { z + shift } else { z });
        }
        labels.push(if positive { Label::Positive } else { Label::Negative });
    }
    let regions = labels
        .iter()
        .map(|l| if l.is_positive() { Region::On } else { Region::Off(0) })
        .collect();
    let names = (0..n_features).map(|j| format!("f{j}")).collect();
    EventTable::new(names, features, regions, None, Some(labels)).expect("generator produces a valid table")
}
