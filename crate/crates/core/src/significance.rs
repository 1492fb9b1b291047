//! The Li & Ma significance of detection and threshold tuning.
//!
//! For counts `n_on` and `n_off` of positively classified events in the On
//! and Off regions and an exposure ratio `alpha`, the statistic is
//!
//! ```text
//! B = 2 n_on  ln((1 + alpha) / alpha * n_on / N)
//!   + 2 n_off ln((1 + alpha) * n_off / N),          N = n_on + n_off
//! ```
//!
//! and the significance is `sign(n_on - alpha n_off) * sqrt(B)`, in units of
//! sigma. `B` is evaluated as `2 (E_on phi(d_on) + E_off phi(d_off))` with
//! `E_on = alpha N / (1 + alpha)`, `E_off = N / (1 + alpha)`, relative
//! deviations `d = (n - E) / E`, and `phi(d) = (1 + d) ln(1 + d) - d`. The
//! two forms are algebraically identical because the deviations cancel, but
//! the second one has no cancellation near the balance point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positively classified event counts in the On and Off regions.
///
/// Counts are real-valued: the relaxed cluster assignment produces fractional
/// counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountPair {
    pub n_on: f64,
    pub n_off: f64,
}

impl CountPair {
    pub fn new(n_on: f64, n_off: f64) -> Result<Self> {
        let counts = CountPair { n_on, n_off };
        counts.validate()?;
        Ok(counts)
    }

    pub const ZERO: CountPair = CountPair { n_on: 0.0, n_off: 0.0 };

    fn validate(&self) -> Result<()> {
        if !(self.n_on.is_finite() && self.n_on >= 0.0) {
            return Err(Error::domain(format!(
                "n_on must be a finite count >= 0, got {}",
                self.n_on
            )));
        }
        if !(self.n_off.is_finite() && self.n_off >= 0.0) {
            return Err(Error::domain(format!(
                "n_off must be a finite count >= 0, got {}",
                self.n_off
            )));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.n_on + self.n_off
    }
}

impl std::ops::Add for CountPair {
    type Output = CountPair;

    fn add(self, rhs: CountPair) -> CountPair {
        CountPair {
            n_on: self.n_on + rhs.n_on,
            n_off: self.n_off + rhs.n_off,
        }
    }
}

impl std::ops::AddAssign for CountPair {
    fn add_assign(&mut self, rhs: CountPair) {
        self.n_on += rhs.n_on;
        self.n_off += rhs.n_off;
    }
}

/// The On/Off exposure ratio `alpha = A_on / A_off`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SignificanceConfig {
    alpha: f64,
}

impl SignificanceConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::domain(format!("alpha must be finite and > 0, got {alpha}")));
        }
        Ok(SignificanceConfig { alpha })
    }

    /// `alpha = p_minus / (1 - p_minus)` for a known negative-class noise rate.
    pub fn from_p_minus(p_minus: f64) -> Result<Self> {
        alpha_from_p_minus(p_minus)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Signed significance for already-validated counts.
    #[inline]
    pub fn sigma(&self, counts: CountPair) -> f64 {
        signed_sigma(counts.n_on, counts.n_off, self.alpha)
    }
}

impl TryFrom<f64> for SignificanceConfig {
    type Error = Error;

    fn try_from(alpha: f64) -> Result<Self> {
        SignificanceConfig::new(alpha)
    }
}

impl From<SignificanceConfig> for f64 {
    fn from(cfg: SignificanceConfig) -> f64 {
        cfg.alpha
    }
}

pub fn alpha_from_p_minus(p_minus: f64) -> Result<SignificanceConfig> {
    if !(p_minus > 0.0 && p_minus < 1.0) {
        return Err(Error::domain(format!("p_minus must lie in (0, 1), got {p_minus}")));
    }
    SignificanceConfig::new(p_minus / (1.0 - p_minus))
}

/// Coefficients `(-1)^k / (k (k - 1))` for `k = 2..=19`.
const PHI_SERIES: [f64; 18] = {
    let mut c = [0.0; 18];
    let mut i = 0;
    while i < 18 {
        let k = (i + 2) as f64;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        c[i] = sign / (k * (k - 1.0));
        i += 1;
    }
    c
};

/// `(1 + d) ln(1 + d) - d` for `d >= -1`, accurate near `d = 0`.
fn phi(d: f64) -> f64 {
    if d.abs() < 0.1 {
        // sum_{k>=2} (-1)^k d^k / (k (k - 1)), truncated where 0.1^k / k^2 < 1e-19
        let mut sum = 0.0;
        for &c in PHI_SERIES.iter().rev() {
            sum = sum * d + c;
        }
        sum * d * d
    } else if d <= -1.0 {
        // 0 ln 0 = 0
        1.0
    } else {
        (1.0 + d) * d.ln_1p() - d
    }
}

/// Balance state of a count pair: the signed excess `n_on - alpha n_off` and
/// the relative deviations of both regions from their null expectations.
struct Deviation {
    excess: f64,
    d_on: f64,
    d_off: f64,
    total: f64,
}

#[inline]
fn deviation(n_on: f64, n_off: f64, alpha: f64) -> Option<Deviation> {
    let total = n_on + n_off;
    if total <= 0.0 || n_on == alpha * n_off {
        return None;
    }
    let excess = (-alpha).mul_add(n_off, n_on);
    if excess == 0.0 {
        return None;
    }
    Some(Deviation {
        excess,
        d_on: excess / (alpha * total),
        d_off: -excess / total,
        total,
    })
}

/// The squared statistic `B` (unsigned). Inputs are assumed valid.
#[inline]
pub fn test_statistic(n_on: f64, n_off: f64, alpha: f64) -> f64 {
    match deviation(n_on, n_off, alpha) {
        None => 0.0,
        Some(dev) => {
            let scale = dev.total / (1.0 + alpha);
            let b = 2.0 * scale * (alpha * phi(dev.d_on) + phi(dev.d_off));
            b.max(0.0)
        }
    }
}

/// Signed significance. Inputs are assumed valid.
#[inline]
pub(crate) fn signed_sigma(n_on: f64, n_off: f64, alpha: f64) -> f64 {
    match deviation(n_on, n_off, alpha) {
        None => 0.0,
        Some(dev) => {
            let scale = dev.total / (1.0 + alpha);
            let b = (2.0 * scale * (alpha * phi(dev.d_on) + phi(dev.d_off))).max(0.0);
            b.sqrt().copysign(dev.excess)
        }
    }
}

/// Signed Li & Ma significance of detection, in sigma.
///
/// Positive when the On region shows an excess over the scaled Off counts,
/// negative for a deficit, and exactly zero for empty counts or exact balance.
pub fn li_ma_significance(counts: CountPair, cfg: &SignificanceConfig) -> Result<f64> {
    counts.validate()?;
    Ok(cfg.sigma(counts))
}

/// Partial derivatives of the squared statistic `B` with respect to
/// `(n_on, n_off)`: `2 ln((1 + alpha) / alpha * n_on / N)` and
/// `2 ln((1 + alpha) n_off / N)`.
pub fn significance_gradient(counts: CountPair, cfg: &SignificanceConfig) -> Result<(f64, f64)> {
    counts.validate()?;
    if counts.n_on <= 0.0 || counts.n_off <= 0.0 {
        return Err(Error::domain("gradient requires n_on > 0 and n_off > 0"));
    }
    Ok(match deviation(counts.n_on, counts.n_off, cfg.alpha) {
        None => (0.0, 0.0),
        Some(dev) => (2.0 * dev.d_on.ln_1p(), 2.0 * dev.d_off.ln_1p()),
    })
}

/// Gradient of the signed significance `f` itself.
///
/// `df/dn = (dB/dn) / (2 f)`; at the balance point both numerator and
/// denominator vanish and the limit is `(1, -alpha) / sqrt(alpha N)`.
/// Counts must be strictly positive.
pub(crate) fn sigma_gradient(n_on: f64, n_off: f64, alpha: f64) -> (f64, f64) {
    let limit = || {
        let s = (alpha * (n_on + n_off)).sqrt();
        (1.0 / s, -alpha / s)
    };
    match deviation(n_on, n_off, alpha) {
        None => limit(),
        Some(dev) => {
            let f = signed_sigma(n_on, n_off, alpha);
            if f == 0.0 {
                limit()
            } else {
                (dev.d_on.ln_1p() / f, dev.d_off.ln_1p() / f)
            }
        }
    }
}

/// Classifier scores paired with the region (On or Off) of each event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPredictions {
    scores: Vec<f64>,
    is_on: Vec<bool>,
}

impl ScoredPredictions {
    pub fn new(scores: Vec<f64>, is_on: Vec<bool>) -> Result<Self> {
        if scores.len() != is_on.len() {
            return Err(Error::invalid(format!(
                "{} scores but {} region tags",
                scores.len(),
                is_on.len()
            )));
        }
        if scores.is_empty() {
            return Err(Error::invalid("scored predictions must be non-empty"));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("score {i} is not finite")));
        }
        Ok(ScoredPredictions { scores, is_on })
    }

    /// Convenience constructor from separate On and Off score lists.
    pub fn from_regions(on: &[f64], off: &[f64]) -> Result<Self> {
        let scores = on.iter().chain(off).copied().collect();
        let is_on = std::iter::repeat_n(true, on.len())
            .chain(std::iter::repeat_n(false, off.len()))
            .collect();
        Self::new(scores, is_on)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn is_on(&self) -> &[bool] {
        &self.is_on
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, bool)> + '_ {
        self.scores.iter().copied().zip(self.is_on.iter().copied())
    }

    /// Counts of events scored strictly above `theta`, per region.
    pub fn counts_above(&self, theta: f64) -> CountPair {
        let mut counts = CountPair::ZERO;
        for (s, on) in self.iter() {
            if s > theta {
                if on {
                    counts.n_on += 1.0;
                } else {
                    counts.n_off += 1.0;
                }
            }
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub theta: f64,
    pub sigma: f64,
}

pub fn significance_at_threshold(preds: &ScoredPredictions, theta: f64, cfg: &SignificanceConfig) -> f64 {
    cfg.sigma(preds.counts_above(theta))
}

/// A threshold strictly between `lo < hi`, as close to the midpoint as
/// floating point allows.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mut m = (lo + hi) / 2.0;
    if !m.is_finite() {
        m = lo / 2.0 + hi / 2.0;
    }
    if m >= hi {
        m = lo;
    }
    m
}

pub(crate) fn below(x: f64) -> f64 {
    let t = x - 1.0;
    if t < x {
        t
    } else {
        x.next_down()
    }
}

pub(crate) fn above(x: f64) -> f64 {
    let t = x + 1.0;
    if t > x {
        t
    } else {
        x.next_up()
    }
}

/// Candidate thresholds of a score set in ascending order: one below the
/// minimum, the midpoints between consecutive distinct values, one above the
/// maximum. `sorted` must be ascending.
pub fn candidate_thresholds(sorted: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let Some(&first) = sorted.first() else {
        return out;
    };
    out.push(below(first));
    for w in sorted.windows(2) {
        if w[1] > w[0] {
            out.push(midpoint(w[0], w[1]));
        }
    }
    out.push(above(sorted[sorted.len() - 1]));
    out
}

/// Chooses the decision threshold that maximizes the significance of the
/// events scored above it. Ties go to the smallest threshold.
pub fn tune_threshold(preds: &ScoredPredictions, cfg: &SignificanceConfig) -> ThresholdResult {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds.scores[a].total_cmp(&preds.scores[b]));

    let mut counts = CountPair::ZERO;
    for &on in &preds.is_on {
        if on {
            counts.n_on += 1.0;
        } else {
            counts.n_off += 1.0;
        }
    }

    let first = preds.scores[order[0]];
    let mut best = ThresholdResult {
        theta: below(first),
        sigma: cfg.sigma(counts),
    };

    let mut i = 0;
    while i < order.len() {
        let value = preds.scores[order[i]];
        while i < order.len() && preds.scores[order[i]] == value {
            if preds.is_on[order[i]] {
                counts.n_on -= 1.0;
            } else {
                counts.n_off -= 1.0;
            }
            i += 1;
        }
        let theta = if i < order.len() {
            midpoint(value, preds.scores[order[i]])
        } else {
            above(value)
        };
        let sigma = cfg.sigma(counts);
        if sigma > best.sigma {
            best = ThresholdResult { theta, sigma };
        }
    }
    best
}
