//! Acceptance suite: one PASS / FAIL / SKIP line per criterion.
//!
//! Run a subset with `cargo test -p sigdetect-cli --test acceptance -- 3 5`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use astro_float::{BigFloat, Consts, RoundingMode};
use rand::Rng as _;

use sigdetect::artifact::ModelArtifact;
use sigdetect::cluster::{assignment_sigma, exhaustive_assignment, optimize_assignment};
use sigdetect::ensemble::{fit_ensemble, EnsembleParams};
use sigdetect::eval::metrics::auc;
use sigdetect::eval::{grouped_cv_predict, inject_ccn_noise, stratified_cv_f1, NoiseSpec};
use sigdetect::rng::{derive_seed, rng_for, Rng, Stream};
use sigdetect::synth::{two_gaussians, wobble_table, WobbleConfig};
use sigdetect::table::{load_event_csv, write_event_csv};
use sigdetect::tree::{best_split, SplitCandidate};
use sigdetect::{
    li_ma_significance, significance_gradient, BaseParams, CountPair, Criterion, CsvSchema, EventTable, ModelSpec,
    Region, SignificanceConfig,
};

enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn verdict(ok: bool, detail: String) -> Outcome {
    Outcome {
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

struct Criterion_ {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn cfg(alpha: f64) -> SignificanceConfig {
    SignificanceConfig::new(alpha).unwrap()
}

fn rng(index: u64) -> Rng {
    rng_for(0x00ac_ce97, Stream::Trial, index)
}

fn log_uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

// ---------------------------------------------------------------- 1

const PREC: usize = 128;
const RM: RoundingMode = RoundingMode::ToEven;

fn big(x: f64) -> BigFloat {
    BigFloat::from_f64(x, PREC)
}

/// Signed significance evaluated from the textbook formula in 128-bit
/// arithmetic, with the sign decided exactly.
fn oracle_sigma(n_on: f64, n_off: f64, alpha: f64, cc: &mut Consts) -> f64 {
    let (on, off, a) = (big(n_on), big(n_off), big(alpha));
    let one = big(1.0);
    let n = on.add(&off, PREC, RM);
    let excess = on.sub(&a.mul(&off, PREC, RM), PREC, RM);
    if n.is_zero() || excess.is_zero() {
        return 0.0;
    }
    let one_plus_a = one.add(&a, PREC, RM);
    let mut half_b = big(0.0);
    if !on.is_zero() {
        let ratio = one_plus_a.div(&a, PREC, RM).mul(&on.div(&n, PREC, RM), PREC, RM);
        half_b = half_b.add(&on.mul(&ratio.ln(PREC, RM, cc), PREC, RM), PREC, RM);
    }
    if !off.is_zero() {
        let ratio = one_plus_a.mul(&off, PREC, RM).div(&n, PREC, RM);
        half_b = half_b.add(&off.mul(&ratio.ln(PREC, RM, cc), PREC, RM), PREC, RM);
    }
    let b = half_b.mul(&big(2.0), PREC, RM);
    let s: f64 = format!("{}", b.sqrt(PREC, RM)).parse().expect("decimal output");
    if excess.is_negative() {
        -s
    } else {
        s
    }
}

fn ac1_statistic() -> Outcome {
    let mut cc = Consts::new().unwrap();
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    let mut cases = Vec::with_capacity(10_000);
    for i in 0..10_000 {
        let alpha = log_uniform(&mut r, 0.01, 10.0);
        let (n_on, n_off) = match i % 4 {
            // integer counts
            0 => (r.random_range(0..5_000u32) as f64, r.random_range(0..20_000u32) as f64),
            // near balance
            1 => {
                let n_off = log_uniform(&mut r, 1.0, 1e6);
                (alpha * n_off * (1.0 + 1e-4 * (r.random::<f64>() - 0.5)), n_off)
            }
            _ => (log_uniform(&mut r, 1e-3, 1e7), log_uniform(&mut r, 1e-3, 1e7)),
        };
        cases.push((n_on, n_off, alpha));
    }
    let start = Instant::now();
    let got: Vec<f64> = cases
        .iter()
        .map(|&(n_on, n_off, alpha)| li_ma_significance(CountPair::new(n_on, n_off).unwrap(), &cfg(alpha)).unwrap())
        .collect();
    let statistic_time = start.elapsed();
    let start = Instant::now();
    let want: Vec<f64> = cases
        .iter()
        .map(|&(n_on, n_off, alpha)| oracle_sigma(n_on, n_off, alpha, &mut cc))
        .collect();
    let oracle_time = start.elapsed();
    for (&got, &want) in got.iter().zip(&want) {
        let rel = if want == 0.0 {
            got.abs()
        } else {
            ((got - want) / want).abs()
        };
        worst = worst.max(rel);
    }
    let zero_cases = [
        li_ma_significance(CountPair::ZERO, &cfg(0.2)).unwrap(),
        li_ma_significance(CountPair::new(20.0, 100.0).unwrap(), &cfg(0.2)).unwrap(),
        li_ma_significance(CountPair::new(3.0, 12.0).unwrap(), &cfg(0.25)).unwrap(),
    ];
    let zeros_exact = zero_cases.iter().all(|&z| z == 0.0);
    // the time budget covers the statistic, not the reference arithmetic
    verdict(
        worst <= 1e-9 && zeros_exact && statistic_time < Duration::from_secs(1),
        format!(
            "10^4 triples, worst relative error {worst:.2e}; balance/empty exact zero: {zeros_exact}; \
             statistic {:.1} ms, oracle {:.1} s",
            statistic_time.as_secs_f64() * 1e3,
            oracle_time.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 2

fn big_b(n_on: f64, n_off: f64, alpha: f64) -> f64 {
    let n = n_on + n_off;
    2.0 * (n_on * ((1.0 + alpha) / alpha * n_on / n).ln() + n_off * ((1.0 + alpha) * n_off / n).ln())
}

fn ac2_gradient() -> Outcome {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1_000 {
        let n_on = log_uniform(&mut r, 1.0, 1e5);
        let n_off = log_uniform(&mut r, 1.0, 1e5);
        let alpha = log_uniform(&mut r, 0.05, 5.0);
        let (g_on, g_off) = significance_gradient(CountPair::new(n_on, n_off).unwrap(), &cfg(alpha)).unwrap();
        // five-point central differences
        let h_on = 1e-3 * n_on;
        let h_off = 1e-3 * n_off;
        let d = |f: &dyn Fn(f64) -> f64, h: f64| (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h);
        let fd_on = d(&|e| big_b(n_on + e, n_off, alpha), h_on);
        let fd_off = d(&|e| big_b(n_on, n_off + e, alpha), h_off);
        let scale = g_on.abs().max(g_off.abs());
        worst = worst
            .max((g_on - fd_on).abs() / scale)
            .max((g_off - fd_off).abs() / scale);
    }
    verdict(worst <= 1e-6, format!("10^3 triples, worst relative error {worst:.2e}"))
}

// ---------------------------------------------------------------- 3

fn ac3_assignment() -> Outcome {
    let mut r = rng(3);
    let (mut hits, mut exceeded) = (0, 0);
    for _ in 0..100 {
        let k = r.random_range(1..=12usize);
        let alpha = log_uniform(&mut r, 0.1, 1.0);
        let counts: Vec<CountPair> = (0..k)
            .map(|_| CountPair::new(r.random_range(0..=50u32) as f64, r.random_range(0..=50u32) as f64).unwrap())
            .collect();
        let c = cfg(alpha);
        let best = assignment_sigma(&counts, &exhaustive_assignment(&counts, &c).unwrap(), &c);
        let got = assignment_sigma(&counts, &optimize_assignment(&counts, &c), &c);
        if (best - got).abs() <= 1e-6 {
            hits += 1;
        }
        if got > best + 1e-9 {
            exceeded += 1;
        }
    }
    verdict(
        hits >= 95 && exceeded == 0,
        format!("{hits}/100 instances reach the exhaustive optimum, {exceeded} exceed it"),
    )
}

// ---------------------------------------------------------------- 4

fn brute_force_split(table: &EventTable, c: &SignificanceConfig, criterion: Criterion) -> Option<SplitCandidate> {
    let mut best: Option<SplitCandidate> = None;
    for j in 0..table.n_features() {
        let mut values: Vec<f64> = (0..table.n_rows()).map(|i| table.value(i, j)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let theta = w[0] + (w[1] - w[0]) / 2.0;
            let (mut left, mut right) = (CountPair::ZERO, CountPair::ZERO);
            for i in 0..table.n_rows() {
                let side = if table.value(i, j) <= theta {
                    &mut left
                } else {
                    &mut right
                };
                match table.region(i) {
                    Region::On => side.n_on += 1.0,
                    Region::Off(_) => side.n_off += 1.0,
                    Region::Unlabeled => {}
                }
            }
            let (ls, rs) = (c.sigma(left), c.sigma(right));
            let score = match criterion {
                Criterion::LiMa => ls.max(rs),
                Criterion::Noisy => ls * ls + rs * rs,
            };
            if best.is_none_or(|b| score > b.score) {
                best = Some(SplitCandidate {
                    feature: j,
                    theta,
                    score,
                    left_sigma: ls,
                    right_sigma: rs,
                });
            }
        }
    }
    best
}

fn ac4_split_oracle() -> Outcome {
    let mut r = rng(4);
    let mut mismatches = Vec::new();
    for t in 0..100 {
        let n = r.random_range(2..=200usize);
        let d = r.random_range(1..=5usize);
        let coarse = t % 3 == 0;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        let x = r.random::<f64>() * 10.0;
                        if coarse {
                            x.round()
                        } else {
                            x
                        }
                    })
                    .collect()
            })
            .collect();
        let regions = (0..n)
            .map(|_| {
                if r.random::<f64>() < 0.3 {
                    Region::On
                } else {
                    Region::Off(0)
                }
            })
            .collect();
        let table = EventTable::from_rows(&rows, regions).unwrap();
        let c = cfg(log_uniform(&mut r, 0.1, 1.0));
        let all: Vec<usize> = (0..n).collect();
        let features: Vec<usize> = (0..d).collect();
        for criterion in [Criterion::LiMa, Criterion::Noisy] {
            let got = best_split(&table, &all, &c, criterion, &features);
            let want = brute_force_split(&table, &c, criterion);
            let same = match (got, want) {
                (None, None) => true,
                (Some(g), Some(w)) => {
                    g.feature == w.feature
                        && g.theta == w.theta
                        && (g.score - w.score).abs() <= 1e-12 * w.score.abs().max(1.0)
                }
                _ => false,
            };
            if !same {
                mismatches.push(format!("table {t} {criterion:?}: {got:?} vs {want:?}"));
            }
        }
    }
    verdict(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "100 tables x 2 criteria agree with brute force".into()
        } else {
            format!("{} mismatches, first: {}", mismatches.len(), mismatches[0])
        },
    )
}

// ---------------------------------------------------------------- 5, 6

const GROUPED_FOLDS: usize = 5;

fn grouped_sigma(table: &EventTable, spec: &ModelSpec, seed: u64) -> f64 {
    grouped_cv_predict(table, spec, GROUPED_FOLDS, seed).unwrap().sigma
}

fn fmt_list(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" ")
}

fn ac5_no_signal() -> Outcome {
    let wobble = WobbleConfig::no_signal(12_000);
    let c = cfg(wobble.alpha());
    let single = ModelSpec::single(BaseParams::tree(Criterion::Noisy, 4), c);
    let forest = ModelSpec::ensemble(BaseParams::tree(Criterion::Noisy, 8), 100, c);
    let (mut singles, mut forests) = (Vec::new(), Vec::new());
    for seed in 0..10 {
        let table = wobble_table(&wobble, 500 + seed);
        singles.push(grouped_sigma(&table, &single, seed));
        forests.push(grouped_sigma(&table, &forest, seed));
    }
    let singles_zero = singles
        .iter()
        .all(|s| format!("{s:.2}") == "0.00" || format!("{s:.2}") == "-0.00");
    let forest_mean = forests.iter().sum::<f64>() / forests.len() as f64;
    verdict(
        singles_zero && forest_mean < 2.0,
        format!(
            "single trees [{}]; forests [{}], mean {forest_mean:.2}",
            fmt_list(&singles),
            fmt_list(&forests)
        ),
    )
}

fn ac6_signal() -> Outcome {
    let wobble = WobbleConfig::signal(20_000);
    let spec = ModelSpec::ensemble(BaseParams::tree(Criterion::Noisy, 6), 100, cfg(wobble.alpha()));
    let sigmas: Vec<f64> = (0..10)
        .map(|seed| grouped_sigma(&wobble_table(&wobble, 600 + seed), &spec, seed))
        .collect();
    let detected = sigmas.iter().filter(|&&s| s > 5.0).count();
    verdict(
        detected >= 9,
        format!("{detected}/10 seeds above 5 sigma: [{}]", fmt_list(&sigmas)),
    )
}

// ---------------------------------------------------------------- 7

fn crab_path() -> Option<PathBuf> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    std::env::var_os("SIGDETECT_CRAB_CSV")
        .map(PathBuf::from)
        .or_else(|| Some(root.join("data/crab_sample.csv")))
        .filter(|p| p.exists())
}

fn ac7_crab() -> Outcome {
    let Some(path) = crab_path() else {
        return Outcome {
            status: Status::Skip,
            detail: "Crab sample not present (set SIGDETECT_CRAB_CSV or add data/crab_sample.csv)".into(),
        };
    };
    let schema = CsvSchema {
        group_column: Some("group".into()),
        ..Default::default()
    };
    let table = match load_event_csv(&path, &schema) {
        Ok(t) => t,
        Err(e) => return verdict(false, format!("{}: {e}", path.display())),
    };
    let c = cfg(0.2);
    let runs = [
        (
            "forest depth 8",
            ModelSpec::ensemble(BaseParams::tree(Criterion::Noisy, 8), 100, c),
            24.5,
            28.0,
        ),
        (
            "single tree depth 4",
            ModelSpec::single(BaseParams::tree(Criterion::Noisy, 4), c),
            22.5,
            26.0,
        ),
        (
            "k-means ensemble k=256",
            ModelSpec::ensemble(BaseParams::kmeans(256), 100, c),
            22.0,
            26.5,
        ),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, spec, lo, hi) in runs {
        let s = grouped_cv_predict(&table, &spec, 10, 0)
            .map(|cv| cv.sigma)
            .unwrap_or(f64::NAN);
        ok &= s >= lo && s <= hi;
        parts.push(format!("{name}: {s:.2} in [{lo}, {hi}]"));
    }
    verdict(ok, format!("{} rows; {}", table.n_rows(), parts.join("; ")))
}

// ---------------------------------------------------------------- 8

fn ac8_ccn_f1() -> Outcome {
    let table = two_gaussians(10_000, 0.05, 4.0, 4, 8);
    let spec = ModelSpec::ensemble(BaseParams::tree(Criterion::Noisy, 8), 100, cfg(1.0));
    let run = |p_plus: f64| {
        let noise = NoiseSpec::new(p_plus, 0.5).unwrap();
        let r = stratified_cv_f1(&table, &noise, &spec, 10, 20, 80).unwrap();
        (r.f1.unwrap(), r.f1_clean_oracle.unwrap())
    };
    let (f1_lo, oracle_lo) = run(0.1);
    let (f1_hi, oracle_hi) = run(0.25);
    let (gap_lo, gap_hi) = (oracle_lo - f1_lo, oracle_hi - f1_hi);
    verdict(
        gap_lo.abs() <= 0.05 && gap_hi.abs() <= 0.08 && f1_hi < f1_lo,
        format!(
            "p+=0.10: F1 {f1_lo:.4} vs oracle {oracle_lo:.4} (gap {gap_lo:.4}); \
             p+=0.25: F1 {f1_hi:.4} vs oracle {oracle_hi:.4} (gap {gap_hi:.4})"
        ),
    )
}

// ---------------------------------------------------------------- 9

fn sigdetect(args: &[&str]) -> (i32, Vec<u8>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_sigdetect"))
        .args(args)
        .output()
        .expect("spawn sigdetect");
    (out.status.code().unwrap_or(-1), out.stdout, out.stderr)
}

fn ac9_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let table = wobble_table(&WobbleConfig::signal(3_000), 9);
    let schema = CsvSchema {
        group_column: Some("group".into()),
        label_column: Some("label".into()),
        ..Default::default()
    };
    write_event_csv(&table, &schema, std::fs::File::create(p("data.csv")).unwrap()).unwrap();
    let other: String = std::iter::once("score\n".to_string())
        .chain((0..table.n_rows()).map(|i| format!("{}\n", table.value(i, 0))))
        .collect();
    std::fs::write(p("other.csv"), other).unwrap();
    let data = p("data.csv");
    let base = ["--data", &data, "--group-column", "group", "--label-column", "label"];

    // (name, args, file written by the command)
    let model_args = [
        "--model",
        "noisy-tree",
        "--max-depth",
        "5",
        "--ensemble",
        "20",
        "--alpha",
        "0.2",
        "--seed",
        "3",
    ];
    let commands: Vec<(&str, Vec<String>, Option<String>)> = vec![
        (
            "fit",
            [&["fit"][..], &base, &model_args, &["--out", "{OUT}"]]
                .concat()
                .iter()
                .map(|s| s.to_string())
                .collect(),
            Some("model.json".into()),
        ),
        (
            "fit-kmeans",
            [
                &["fit"][..],
                &base,
                &[
                    "--model",
                    "kmeans",
                    "--k",
                    "8",
                    "--ensemble",
                    "5",
                    "--alpha",
                    "0.2",
                    "--out",
                    "{OUT}",
                ],
            ]
            .concat()
            .iter()
            .map(|s| s.to_string())
            .collect(),
            Some("km.json".into()),
        ),
        (
            "predict",
            [&["predict"][..], &base, &["--model-file", "{MODEL}"]]
                .concat()
                .iter()
                .map(|s| s.to_string())
                .collect(),
            None,
        ),
        (
            "significance",
            [
                &["significance"][..],
                &base,
                &["--model-file", "{MODEL}", "--alpha", "0.2"],
            ]
            .concat()
            .iter()
            .map(|s| s.to_string())
            .collect(),
            None,
        ),
        (
            "tune-threshold",
            [
                &["tune-threshold"][..],
                &base,
                &["--model-file", "{MODEL}", "--p-minus", "0.1666", "--out", "{OUT}"],
            ]
            .concat()
            .iter()
            .map(|s| s.to_string())
            .collect(),
            Some("tuned.json".into()),
        ),
        (
            "inject-noise",
            [
                &["inject-noise"][..],
                &base,
                &["--p-plus", "0.1", "--p-minus", "0.4", "--seed", "2"],
            ]
            .concat()
            .iter()
            .map(|s| s.to_string())
            .collect(),
            None,
        ),
        (
            "eval-grouped",
            [
                &["eval-grouped"][..],
                &base,
                &model_args,
                &["--folds", "4", "--repeats", "2"],
            ]
            .concat()
            .iter()
            .map(|s| s.to_string())
            .collect(),
            None,
        ),
        (
            "eval-noisy",
            [
                &["eval-noisy"][..],
                &base,
                &[
                    "--model",
                    "noisy-tree",
                    "--max-depth",
                    "4",
                    "--ensemble",
                    "10",
                    "--p-plus",
                    "0.1",
                    "--p-minus",
                    "0.5",
                    "--folds",
                    "3",
                    "--trials",
                    "2",
                ],
            ]
            .concat()
            .iter()
            .map(|s| s.to_string())
            .collect(),
            None,
        ),
        (
            "fake-on",
            [
                &["fake-on"][..],
                &base,
                &[
                    "--model",
                    "lima-tree",
                    "--max-depth",
                    "4",
                    "--alpha",
                    "0.25",
                    "--promote",
                    "2",
                    "--folds",
                    "4",
                ],
            ]
            .concat()
            .iter()
            .map(|s| s.to_string())
            .collect(),
            None,
        ),
        (
            "roc-dump",
            [&["roc-dump"][..], &base, &["--model-file", "{MODEL}"]]
                .concat()
                .iter()
                .map(|s| s.to_string())
                .collect(),
            None,
        ),
        (
            "agreement",
            [
                &["agreement"][..],
                &base,
                &["--model-file", "{MODEL}", "--other", &p("other.csv")],
            ]
            .concat()
            .iter()
            .map(|s| s.to_string())
            .collect(),
            None,
        ),
    ];

    let model = p("model.json");
    let mut failures = Vec::new();
    let mut reference: Option<Vec<u8>> = None;
    for (name, args, written) in &commands {
        let mut outputs = Vec::new();
        for (run, threads) in ["1", "4", "4"].iter().enumerate() {
            let out_file = written.as_ref().map(|f| p(&format!("{run}-{f}")));
            let mut argv: Vec<String> = vec!["--threads".into(), threads.to_string()];
            argv.extend(args.iter().map(|a| {
                a.replace("{MODEL}", &model)
                    .replace("{OUT}", out_file.as_deref().unwrap_or(""))
            }));
            let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
            let (code, stdout, stderr) = sigdetect(&argv);
            if code != 0 {
                failures.push(format!(
                    "{name} exited {code}: {}",
                    String::from_utf8_lossy(&stderr).trim()
                ));
                break;
            }
            let mut bytes = stdout;
            if let Some(f) = &out_file {
                bytes.extend(std::fs::read(f).unwrap());
                if *name == "fit" && run == 0 {
                    std::fs::copy(f, &model).unwrap();
                    reference = Some(std::fs::read(f).unwrap());
                }
            }
            outputs.push(bytes);
        }
        if outputs.len() == 3 && !(outputs[0] == outputs[1] && outputs[1] == outputs[2]) {
            failures.push(format!("{name}: outputs differ"));
        }
    }
    if let Some(bytes) = reference {
        let loaded = ModelArtifact::from_json(std::str::from_utf8(&bytes).unwrap()).unwrap();
        if loaded.to_json().unwrap().as_bytes() != bytes.as_slice() {
            failures.push("model file does not re-serialize byte-identically".into());
        }
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} commands x 3 runs (threads 1, 4, 4) byte-identical", commands.len())
        } else {
            failures.join("; ")
        },
    )
}

// ---------------------------------------------------------------- 10

fn ac10_auc_immunity() -> Outcome {
    let noise = NoiseSpec::new(0.1, 0.5).unwrap();
    let mut gaps = Vec::new();
    let mut details = Vec::new();
    for seed in 0..10u64 {
        let train = two_gaussians(20_000, 0.05, 4.0, 4, 1_000 + seed);
        let test = two_gaussians(20_000, 0.05, 4.0, 4, 2_000 + seed);
        let labels = train.clean_labels().unwrap();
        let truth: Vec<bool> = test.clean_labels().unwrap().iter().map(|l| l.is_positive()).collect();
        let noisy = train
            .with_regions(inject_ccn_noise(labels, &noise, derive_seed(seed, Stream::Noise, 0)))
            .unwrap();
        let n_pos = labels.iter().filter(|l| l.is_positive()).count() as f64;
        let prior_ratio = n_pos / (labels.len() as f64 - n_pos);
        let score = |table: &EventTable, alpha: f64| {
            let params = EnsembleParams {
                base: BaseParams::tree(Criterion::Noisy, 8),
                n_members: 100,
            };
            let forest = fit_ensemble(table, &params, &cfg(alpha), seed).unwrap();
            let scores: Vec<f64> = (0..test.n_rows())
                .map(|i| forest.predict_score(test.row(i)).unwrap())
                .collect();
            auc(&scores, &truth).unwrap()
        };
        let auc_noisy = score(&noisy, noise.p_minus / (1.0 - noise.p_minus));
        let auc_clean = score(&train, prior_ratio);
        gaps.push(auc_clean - auc_noisy);
        details.push(format!("{auc_noisy:.4}/{auc_clean:.4}"));
    }
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    verdict(
        mean_gap.abs() <= 0.03,
        format!(
            "mean AUC gap {mean_gap:.4}; noisy/clean per seed [{}]",
            details.join(" ")
        ),
    )
}

// ----------------------------------------------------------------

fn main() {
    let criteria = [
        Criterion_ {
            id: 1,
            name: "statistic matches high-precision oracle",
            budget: Duration::MAX,
            run: ac1_statistic,
        },
        Criterion_ {
            id: 2,
            name: "gradient matches finite differences",
            budget: Duration::from_secs(1),
            run: ac2_gradient,
        },
        Criterion_ {
            id: 3,
            name: "assignment reaches exhaustive optimum",
            budget: Duration::from_secs(30),
            run: ac3_assignment,
        },
        Criterion_ {
            id: 4,
            name: "split search equals brute force",
            budget: Duration::from_secs(30),
            run: ac4_split_oracle,
        },
        Criterion_ {
            id: 5,
            name: "no-signal data gives no detection",
            budget: Duration::from_secs(300),
            run: ac5_no_signal,
        },
        Criterion_ {
            id: 6,
            name: "synthetic source detected above 5 sigma",
            budget: Duration::from_secs(600),
            run: ac6_signal,
        },
        Criterion_ {
            id: 7,
            name: "Crab sample reproduction",
            budget: Duration::from_secs(1800),
            run: ac7_crab,
        },
        Criterion_ {
            id: 8,
            name: "F1 under class-conditional noise",
            budget: Duration::from_secs(600),
            run: ac8_ccn_f1,
        },
        Criterion_ {
            id: 9,
            name: "CLI output is deterministic",
            budget: Duration::MAX,
            run: ac9_determinism,
        },
        Criterion_ {
            id: 10,
            name: "AUC is immune to label noise",
            budget: Duration::MAX,
            run: ac10_auc_immunity,
        },
    ];
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.trim_start_matches("AC").parse().ok())
        .collect();

    let mut failed = 0;
    for c in criteria
        .iter()
        .filter(|c| selected.is_empty() || selected.contains(&c.id))
    {
        let start = Instant::now();
        let mut outcome = (c.run)();
        let elapsed = start.elapsed();
        if matches!(outcome.status, Status::Pass) && elapsed > c.budget {
            outcome.status = Status::Fail;
            outcome.detail.push_str(&format!("; over the {:?} budget", c.budget));
        }
        let tag = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Skip => "SKIP",
        };
        println!(
            "AC{:<2} {tag} {} ({:.1}s): {}",
            c.id,
            c.name,
            elapsed.as_secs_f64(),
            outcome.detail
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
