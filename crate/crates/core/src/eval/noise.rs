//! Label-noise injection and the fake-On transform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{uniform_at, Stream};
use crate::table::{EventTable, Label, Region};

/// Class-conditional flip rates: `p_plus = P(Off | positive)`,
/// `p_minus = P(On | negative)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub p_plus: f64,
    pub p_minus: f64,
}

impl NoiseSpec {
    pub fn new(p_plus: f64, p_minus: f64) -> Result<Self> {
        for (name, p) in [("p_plus", p_plus), ("p_minus", p_minus)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::domain(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(NoiseSpec { p_plus, p_minus })
    }

    /// Whether the tags are correct on average (`p_plus + p_minus < 1`).
    /// Violations are allowed, e.g. for adversarial tests.
    pub fn is_standard_ccn(&self) -> bool {
        self.p_plus + self.p_minus < 1.0
    }
}

/// Draws noisy region tags from clean labels.
///
/// Positives become `Off(0)` with probability `p_plus`, negatives become
/// `On` with probability `p_minus`. Each decision is a function of
/// `(label, seed, row index)` only.
pub fn inject_ccn_noise(labels: &[Label], spec: &NoiseSpec, seed: u64) -> Vec<Region> {
    labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let u = uniform_at(seed, Stream::Noise, i as u64);
            match label {
                Label::Positive if u < spec.p_plus => Region::Off(0),
                Label::Positive => Region::On,
                Label::Negative if u < spec.p_minus => Region::On,
                Label::Negative => Region::Off(0),
            }
        })
        .collect()
}

/// Drops the On rows and re-tags the rows of Off region `promote` as On.
/// All other rows are kept unchanged and in order.
pub fn fake_on_transform(table: &EventTable, promote: u32) -> Result<EventTable> {
    let offs = table.off_regions();
    if offs.len() < 2 {
        return Err(Error::invalid("the fake-On transform needs at least two Off regions"));
    }
    if !offs.contains(&promote) {
        return Err(Error::invalid(format!("no Off region {promote} (present: {offs:?})")));
    }
    let keep: Vec<usize> = (0..table.n_rows()).filter(|&i| table.region(i) != Region::On).collect();
    let selected = table.select(&keep);
    let regions = selected
        .regions()
        .iter()
        .map(|&r| if r == Region::Off(promote) { Region::On } else { r })
        .collect();
    selected.with_regions(regions)
}
