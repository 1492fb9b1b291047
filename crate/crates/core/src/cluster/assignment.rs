//! Choosing which clusters to call positive.
//!
//! The binary problem `max_a f(sum a_c on_c, sum a_c off_c)` over
//! `a in {0,1}^k` is relaxed to the box `[0,1]^k` and solved by projected
//! gradient ascent on the signed significance, then rounded and polished by
//! single-coordinate flips until no flip improves it.

use crate::error::{Error, Result};
use crate::significance::{sigma_gradient, CountPair, SignificanceConfig};

pub const MAX_EXHAUSTIVE_CLUSTERS: usize = 20;

const ASCENT_ITERATIONS: usize = 500;
const ASCENT_STEP: f64 = 0.1;
const COUNT_FLOOR: f64 = 1e-12;

/// Selected On/Off totals of a binary assignment, summed in cluster order.
pub fn selected_counts(counts: &[CountPair], assignment: &[bool]) -> CountPair {
    let mut total = CountPair::ZERO;
    for (c, &on) in counts.iter().zip(assignment) {
        if on {
            total += *c;
        }
    }
    total
}

pub fn assignment_sigma(counts: &[CountPair], assignment: &[bool], cfg: &SignificanceConfig) -> f64 {
    cfg.sigma(selected_counts(counts, assignment))
}

/// Relaxed projected gradient ascent followed by rounding and flip search.
///
/// Never returns an assignment with negative significance: the all-zero
/// vector (sigma = 0) is always available as a fallback.
pub fn optimize_assignment(counts: &[CountPair], cfg: &SignificanceConfig) -> Vec<bool> {
    let k = counts.len();
    let alpha = cfg.alpha();
    let mut a = vec![0.5; k];
    let mut grad = vec![0.0; k];

    for t in 0..ASCENT_ITERATIONS {
        let (mut n_on, mut n_off) = (0.0, 0.0);
        for (c, &w) in counts.iter().zip(&a) {
            n_on += w * c.n_on;
            n_off += w * c.n_off;
        }
        let (g_on, g_off) = sigma_gradient(n_on.max(COUNT_FLOOR), n_off.max(COUNT_FLOOR), alpha);
        let mut norm = 0.0;
        for (g, c) in grad.iter_mut().zip(counts) {
            *g = c.n_on * g_on + c.n_off * g_off;
            norm += *g * *g;
        }
        let norm = norm.sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            break;
        }
        let step = ASCENT_STEP / ((t + 1) as f64).sqrt() / norm;
        for (w, g) in a.iter_mut().zip(&grad) {
            *w = (*w + step * g).clamp(0.0, 1.0);
        }
    }

    let mut assignment: Vec<bool> = a.iter().map(|&w| w > 0.5).collect();
    let mut sigma = assignment_sigma(counts, &assignment, cfg);
    loop {
        let mut improved = false;
        for c in 0..k {
            assignment[c] = !assignment[c];
            let flipped = assignment_sigma(counts, &assignment, cfg);
            if flipped > sigma {
                sigma = flipped;
                improved = true;
            } else {
                assignment[c] = !assignment[c];
            }
        }
        if !improved {
            break;
        }
    }
    if sigma <= 0.0 {
        assignment.iter_mut().for_each(|x| *x = false);
    }
    assignment
}

/// Brute-force maximizer over all `2^k` assignments. Ties go to the fewest
/// selected clusters, then the lexicographically smallest vector.
pub fn exhaustive_assignment(counts: &[CountPair], cfg: &SignificanceConfig) -> Result<Vec<bool>> {
    let k = counts.len();
    if k > MAX_EXHAUSTIVE_CLUSTERS {
        return Err(Error::invalid(format!(
            "exhaustive search supports at most {MAX_EXHAUSTIVE_CLUSTERS} clusters, got {k}"
        )));
    }
    let decode = |mask: u32| -> Vec<bool> { (0..k).map(|c| mask >> c & 1 == 1).collect() };
    let mut best: Option<(f64, Vec<bool>)> = None;
    for mask in 0u32..(1u32 << k) {
        let a = decode(mask);
        let s = assignment_sigma(counts, &a, cfg);
        let better = match &best {
            None => true,
            Some((bs, ba)) => {
                let selected = |v: &[bool]| v.iter().filter(|&&x| x).count();
                s > *bs || (s == *bs && (selected(&a), &a) < (selected(ba), ba))
            }
        };
        if better {
            best = Some((s, a));
        }
    }
    Ok(best.map(|(_, a)| a).unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn pairs(v: &[(f64, f64)]) -> Vec<CountPair> {
        v.iter().map(|&(a, b)| CountPair::new(a, b).unwrap()).collect()
    }

    #[test]
    fn two_clusters() {
        let cfg = SignificanceConfig::new(1.0).unwrap();
        let counts = pairs(&[(30.0, 10.0), (5.0, 20.0)]);
        // f(30,10) = 3.235 beats f(35,30), f(5,20) < 0 and f(0,0) = 0
        assert_eq!(exhaustive_assignment(&counts, &cfg).unwrap(), vec![true, false]);
        let a = optimize_assignment(&counts, &cfg);
        assert_eq!(a, vec![true, false]);
        assert!((assignment_sigma(&counts, &a, &cfg) - 3.2349595).abs() < 1e-6);
    }

    #[test]
    fn all_zero_counts() {
        let cfg = SignificanceConfig::new(0.2).unwrap();
        let counts = vec![CountPair::ZERO; 5];
        assert_eq!(optimize_assignment(&counts, &cfg), vec![false; 5]);
        assert_eq!(exhaustive_assignment(&counts, &cfg).unwrap(), vec![false; 5]);
    }

    #[test]
    fn single_cluster() {
        let cfg = SignificanceConfig::new(1.0).unwrap();
        assert_eq!(exhaustive_assignment(&pairs(&[(10.0, 1.0)]), &cfg).unwrap(), vec![true]);
        assert_eq!(
            exhaustive_assignment(&pairs(&[(1.0, 10.0)]), &cfg).unwrap(),
            vec![false]
        );
        assert_eq!(optimize_assignment(&pairs(&[(1.0, 10.0)]), &cfg), vec![false]);
    }

    #[test]
    fn exhaustive_rejects_large_k() {
        let cfg = SignificanceConfig::new(1.0).unwrap();
        assert!(exhaustive_assignment(&vec![CountPair::ZERO; 21], &cfg).is_err());
    }

    #[test]
    fn matches_exhaustive_on_random_instances() {
        let cfg = SignificanceConfig::new(0.2).unwrap();
        let mut rng = crate::rng::rng_for(1, crate::rng::Stream::Synth, 0);
        let mut agree = 0;
        for _ in 0..100 {
            let counts: Vec<CountPair> = (0..10)
                .map(|_| CountPair::new(rng.random_range(0..=50) as f64, rng.random_range(0..=50) as f64).unwrap())
                .collect();
            let relaxed = optimize_assignment(&counts, &cfg);
            let exact = exhaustive_assignment(&counts, &cfg).unwrap();
            let (rs, es) = (
                assignment_sigma(&counts, &relaxed, &cfg),
                assignment_sigma(&counts, &exact, &cfg),
            );
            assert!(rs <= es);
            assert!(rs >= 0.0);
            if relaxed == exact {
                agree += 1;
                assert!((rs - es).abs() < 1e-9);
            }
        }
        assert!(agree >= 95, "agreement {agree}/100");
    }
}
