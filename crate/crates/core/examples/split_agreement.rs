//! How often does the squared-significance split pick the same (feature,
//! threshold) as information gain computed on the On/Off tags?
//!
//! Summed over the children, `B = 2 n KL(p || q)` splits into a term fixed
//! by the parent plus `2 N` times the information gain, for any alpha; the
//! rare disagreements are floating-point near-ties.
//!
//! `cargo run --release -p sigdetect --example split_agreement`

use rand::Rng as _;

use sigdetect::rng::{rng_for, Stream};
use sigdetect::tree::best_split;
use sigdetect::{Criterion, EventTable, Region, SignificanceConfig};

fn entropy(on: f64, off: f64) -> f64 {
    let n = on + off;
    if n == 0.0 {
        return 0.0;
    }
    [on, off]
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| -(c / n) * (c / n).ln())
        .sum()
}

/// Information-gain split over the same candidates and with the same tie
/// rule as `best_split`.
fn info_gain_split(table: &EventTable) -> Option<(usize, f64)> {
    let n = table.n_rows();
    let total_on = (0..n).filter(|&i| table.region(i).is_on()).count() as f64;
    let parent = entropy(total_on, n as f64 - total_on);
    let mut best: Option<(f64, usize, f64)> = None;
    for j in 0..table.n_features() {
        let mut col: Vec<(f64, bool)> = (0..n).map(|i| (table.value(i, j), table.region(i).is_on())).collect();
        col.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut on, mut seen) = (0.0, 0.0);
        let mut i = 0;
        while i < n {
            let v = col[i].0;
            while i < n && col[i].0 == v {
                on += f64::from(u8::from(col[i].1));
                seen += 1.0;
                i += 1;
            }
            if i == n {
                break;
            }
            let rest = n as f64 - seen;
            let children =
                (seen * entropy(on, seen - on) + rest * entropy(total_on - on, rest - total_on + on)) / n as f64;
            let gain = parent - children;
            if best.is_none_or(|b| gain > b.0) {
                best = Some((gain, j, v + (col[i].0 - v) / 2.0));
            }
        }
    }
    best.map(|(_, j, t)| (j, t))
}

fn main() {
    let mut rng = rng_for(2024, Stream::Synth, 0);
    let trials = 2_000;
    println!("alpha         tables  same feature  same split");
    for alpha_mode in ["0.2", "1.0", "on/off ratio"] {
        let (mut feature_hits, mut split_hits, mut counted) = (0, 0, 0);
        for _ in 0..trials {
            let n = rng.random_range(10..=80usize);
            let d = rng.random_range(1..=3usize);
            let p_on = rng.random_range(0.1..0.6);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| (rng.random::<f64>() * 20.0).round()).collect())
                .collect();
            let regions: Vec<Region> = rows
                .iter()
                .map(|r| {
                    let lift = if r[0] > 12.0 { 0.25 } else { 0.0 };
                    if rng.random::<f64>() < p_on + lift {
                        Region::On
                    } else {
                        Region::Off(0)
                    }
                })
                .collect();
            let n_on = regions.iter().filter(|r| r.is_on()).count();
            if n_on == 0 || n_on == n {
                continue;
            }
            let alpha = match alpha_mode {
                "0.2" => 0.2,
                "1.0" => 1.0,
                _ => n_on as f64 / (n - n_on) as f64,
            };
            let table = EventTable::from_rows(&rows, regions).unwrap();
            let cfg = SignificanceConfig::new(alpha).unwrap();
            let all: Vec<usize> = (0..n).collect();
            let features: Vec<usize> = (0..d).collect();
            let (Some(sig), Some(ig)) = (
                best_split(&table, &all, &cfg, Criterion::Noisy, &features),
                info_gain_split(&table),
            ) else {
                continue;
            };
            counted += 1;
            if sig.feature == ig.0 {
                feature_hits += 1;
                if sig.theta == ig.1 {
                    split_hits += 1;
                }
            }
        }
        println!(
            "{alpha_mode:<12} {counted:>7}  {:>11.1}%  {:>9.1}%",
            100.0 * feature_hits as f64 / counted as f64,
            100.0 * split_hits as f64 / counted as f64
        );
    }
}
