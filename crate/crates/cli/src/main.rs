use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sigdetect::artifact::{load_model, save_model, ModelArtifact};
use sigdetect::eval::metrics::{pearson, roc_points, spearman};
use sigdetect::eval::{evaluate_grouped, fake_on_transform, inject_ccn_noise, stratified_cv_f1, EvalReport, NoiseSpec};
use sigdetect::model::fit_model;
use sigdetect::table::{load_event_csv, write_event_csv};
use sigdetect::{
    BaseParams, Criterion, CsvSchema, EventTable, ModelSpec, ScoredPredictions, SignificanceConfig, ThresholdSource,
};

#[derive(Parser)]
#[command(
    name = "sigdetect",
    version,
    about = "Learn event classifiers from On/Off region tags"
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a detector and write the model file.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sig: SigArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write per-row scores and decisions as CSV.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the significance of the model's positive decisions.
    Significance {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model_file: PathBuf,
        #[command(flatten)]
        sig: SigArgs,
    },
    /// Re-tune the decision threshold of an ensemble on a table.
    TuneThreshold {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model_file: PathBuf,
        #[command(flatten)]
        sig: SigArgs,
        /// Write the re-tuned model here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replace region tags by noisy copies of the clean labels.
    InjectNoise {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        p_plus: f64,
        #[arg(long)]
        p_minus: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grouped cross-validation with pooled hold-out significance.
    EvalGrouped {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sig: SigArgs,
        #[arg(long)]
        folds: usize,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Stratified cross-validation on noisy tags, scored by F1 on clean labels.
    EvalNoisy {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        p_plus: f64,
        #[arg(long)]
        p_minus: f64,
        /// Defaults to p_minus / (1 - p_minus).
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Drop the On region, promote an Off region to On and run grouped CV.
    FakeOn {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Exposure ratio of the transformed table.
        #[command(flatten)]
        sig: SigArgs,
        #[arg(long)]
        promote: u32,
        #[arg(long)]
        folds: usize,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the ROC curve as (fpr, tpr, threshold) CSV. Uses clean labels
    /// when a label column is given, region tags otherwise.
    RocDump {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Correlate the model's scores with another predictions CSV.
    Agreement {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model_file: PathBuf,
        /// CSV with a `score` column, one row per data row.
        #[arg(long)]
        other: PathBuf,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "region")]
    region_column: String,
    #[arg(long)]
    group_column: Option<String>,
    #[arg(long)]
    label_column: Option<String>,
}

impl DataArgs {
    fn schema(&self) -> CsvSchema {
        CsvSchema {
            region_column: self.region_column.clone(),
            group_column: self.group_column.clone(),
            label_column: self.label_column.clone(),
        }
    }

    fn load(&self) -> Result<EventTable, CliError> {
        Ok(load_event_csv(&self.data, &self.schema())?)
    }
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SigArgs {
    /// Exposure ratio A_on / A_off.
    #[arg(long)]
    alpha: Option<f64>,
    /// Negative-class noise rate; alpha = p / (1 - p).
    #[arg(long = "p-minus")]
    p_minus: Option<f64>,
}

impl SigArgs {
    fn config(&self) -> Result<SignificanceConfig, CliError> {
        let cfg = match (self.alpha, self.p_minus) {
            (Some(a), None) => SignificanceConfig::new(a),
            (None, Some(p)) => SignificanceConfig::from_p_minus(p),
            _ => unreachable!("clap enforces exactly one"),
        };
        cfg.map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Kmeans,
    LimaTree,
    NoisyTree,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Oob,
    Pooled,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum)]
    model: ModelKind,
    /// Clusters (kmeans).
    #[arg(long, default_value_t = 16)]
    k: usize,
    #[arg(long, default_value_t = sigdetect::cluster::DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Features per k-means ensemble member (default ceil(d/2)).
    #[arg(long)]
    kmeans_features: Option<usize>,
    /// Maximum tree depth.
    #[arg(long, default_value_t = 8)]
    max_depth: usize,
    /// Number of bagged members; a single detector when absent.
    #[arg(long)]
    ensemble: Option<usize>,
    /// Predictions the ensemble threshold is tuned on.
    #[arg(long, value_enum, default_value = "oob")]
    threshold_source: SourceArg,
}

impl ModelArgs {
    fn spec(&self, cfg: SignificanceConfig) -> Result<ModelSpec, CliError> {
        let base = match self.model {
            ModelKind::Kmeans => BaseParams::KMeans {
                k: self.k,
                max_iter: self.max_iter,
                feature_subset_size: self.kmeans_features,
            },
            ModelKind::LimaTree => BaseParams::tree(Criterion::LiMa, self.max_depth),
            ModelKind::NoisyTree => BaseParams::tree(Criterion::Noisy, self.max_depth),
        };
        if self.ensemble == Some(0) {
            return Err(CliError::Usage("--ensemble must be at least 1".into()));
        }
        Ok(ModelSpec {
            base,
            ensemble: self.ensemble,
            threshold_source: match self.threshold_source {
                SourceArg::Oob => ThresholdSource::Oob,
                SourceArg::Pooled => ThresholdSource::Pooled,
            },
            significance: cfg,
        })
    }
}

enum CliError {
    Usage(String),
    Data(String),
}

impl From<sigdetect::Error> for CliError {
    fn from(e: sigdetect::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_for(path: &Path, table: &EventTable) -> Result<ModelArtifact, CliError> {
    let artifact = load_model(path)?;
    artifact.check_schema(table)?;
    Ok(artifact)
}

fn all_rows(table: &EventTable) -> Vec<usize> {
    (0..table.n_rows()).collect()
}

fn print_report(report: &EvalReport) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    out.write_all(report.to_document().as_bytes())?;
    Ok(())
}

fn noise_spec(p_plus: f64, p_minus: f64) -> Result<NoiseSpec, CliError> {
    NoiseSpec::new(p_plus, p_minus).map_err(|e| CliError::Usage(e.to_string()))
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Fit {
            data,
            model,
            sig,
            seed,
            out,
        } => {
            let spec = model.spec(sig.config()?)?;
            let table = data.load()?;
            let fitted = fit_model(&table, &spec, seed)?;
            let artifact = ModelArtifact::new(fitted, spec, seed, table.feature_names().to_vec())?;
            save_model(&artifact, &out)?;
        }
        Command::Predict { data, model_file, out } => {
            let table = data.load()?;
            let artifact = load_for(&model_file, &table)?;
            let scores = artifact.model.score_rows(&table, &all_rows(&table))?;
            let mut w = csv::Writer::from_writer(output(out.as_deref())?);
            w.write_record(["row", "score", "prediction"])?;
            let threshold = artifact.model.threshold();
            for (i, s) in scores.iter().enumerate() {
                let pred = if *s > threshold { "1" } else { "0" };
                w.write_record([i.to_string(), s.to_string(), pred.to_string()])?;
            }
            w.flush()?;
        }
        Command::Significance { data, model_file, sig } => {
            let cfg = sig.config()?;
            let table = data.load()?;
            let artifact = load_for(&model_file, &table)?;
            let rows = table.labeled_rows();
            let scores = artifact.model.score_rows(&table, &rows)?;
            let threshold = artifact.model.threshold();
            let selected: Vec<usize> = rows
                .iter()
                .zip(&scores)
                .filter(|(_, &s)| s > threshold)
                .map(|(&i, _)| i)
                .collect();
            println!("{:.6}", cfg.sigma(table.counts(&selected)));
        }
        Command::TuneThreshold {
            data,
            model_file,
            sig,
            out,
        } => {
            let cfg = sig.config()?;
            let table = data.load()?;
            let mut artifact = load_for(&model_file, &table)?;
            let sigdetect::FittedModel::Ensemble(ens) = &mut artifact.model else {
                return Err(CliError::Usage("only ensemble models have a tunable threshold".into()));
            };
            let rows = table.labeled_rows();
            let mut scores = Vec::with_capacity(rows.len());
            for &i in &rows {
                scores.push(ens.predict_score(table.row(i))?);
            }
            let is_on = rows.iter().map(|&i| table.region(i).is_on()).collect();
            let preds = ScoredPredictions::new(scores, is_on)?;
            if preds.is_empty() {
                return Err(CliError::Data("no labeled rows to tune on".into()));
            }
            let result = ens.tune(&preds, &cfg);
            artifact.threshold = result.theta;
            println!("threshold {:.6}", result.theta);
            println!("sigma {:.6}", result.sigma);
            if let Some(out) = out {
                save_model(&artifact, &out)?;
            }
        }
        Command::InjectNoise {
            data,
            p_plus,
            p_minus,
            seed,
            out,
        } => {
            let noise = noise_spec(p_plus, p_minus)?;
            let table = data.load()?;
            let labels = table
                .clean_labels()
                .ok_or_else(|| CliError::Usage("inject-noise needs --label-column".into()))?;
            let noisy = table.with_regions(inject_ccn_noise(labels, &noise, seed))?;
            let mut schema = data.schema();
            if schema.region_column.is_empty() {
                schema.region_column = "region".into();
            }
            write_event_csv(&noisy, &schema, output(out.as_deref())?)?;
        }
        Command::EvalGrouped {
            data,
            model,
            sig,
            folds,
            repeats,
            seed,
        } => {
            let spec = model.spec(sig.config()?)?;
            let table = data.load()?;
            print_report(&evaluate_grouped(&table, &spec, folds, repeats, seed)?)?;
        }
        Command::EvalNoisy {
            data,
            model,
            p_plus,
            p_minus,
            alpha,
            folds,
            trials,
            seed,
        } => {
            let noise = noise_spec(p_plus, p_minus)?;
            let cfg = match alpha {
                Some(a) => SignificanceConfig::new(a),
                None => SignificanceConfig::from_p_minus(p_minus),
            }
            .map_err(|e| CliError::Usage(e.to_string()))?;
            let spec = model.spec(cfg)?;
            let table = data.load()?;
            print_report(&stratified_cv_f1(&table, &noise, &spec, folds, trials, seed)?)?;
        }
        Command::FakeOn {
            data,
            model,
            sig,
            promote,
            folds,
            repeats,
            seed,
        } => {
            let spec = model.spec(sig.config()?)?;
            let table = fake_on_transform(&data.load()?, promote)?;
            let mut report = evaluate_grouped(&table, &spec, folds, repeats, seed)?;
            report.protocol = format!("fake-on:{promote}");
            print_report(&report)?;
        }
        Command::RocDump { data, model_file, out } => {
            let table = data.load()?;
            let artifact = load_for(&model_file, &table)?;
            let (rows, truth): (Vec<usize>, Vec<bool>) = match table.clean_labels() {
                Some(labels) => (all_rows(&table), labels.iter().map(|l| l.is_positive()).collect()),
                None => {
                    let rows = table.labeled_rows();
                    let truth = rows.iter().map(|&i| table.region(i).is_on()).collect();
                    (rows, truth)
                }
            };
            let scores = artifact.model.score_rows(&table, &rows)?;
            let points = roc_points(&scores, &truth)?;
            let mut w = csv::Writer::from_writer(output(out.as_deref())?);
            w.write_record(["fpr", "tpr", "threshold"])?;
            for p in points {
                w.write_record([p.fpr.to_string(), p.tpr.to_string(), p.threshold.to_string()])?;
            }
            w.flush()?;
        }
        Command::Agreement {
            data,
            model_file,
            other,
        } => {
            let table = data.load()?;
            let artifact = load_for(&model_file, &table)?;
            let ours = artifact.model.score_rows(&table, &all_rows(&table))?;
            let theirs = read_scores(&other)?;
            if theirs.len() != ours.len() {
                return Err(CliError::Data(format!(
                    "{} has {} rows, the data has {}",
                    other.display(),
                    theirs.len(),
                    ours.len()
                )));
            }
            let report = EvalReport {
                protocol: "agreement".into(),
                n_rows: ours.len(),
                pearson: Some(pearson(&ours, &theirs)?),
                spearman: Some(spearman(&ours, &theirs)?),
                ..Default::default()
            };
            let mut doc = serde_json::Map::new();
            let value = serde_json::from_str::<serde_json::Value>(&report.to_document())
                .map_err(|e| CliError::Data(e.to_string()))?;
            for key in ["n_rows", "pearson", "spearman"] {
                doc.insert(key.into(), value[key].clone());
            }
            let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Data(e.to_string()))?;
            println!("{text}");
        }
    }
    Ok(())
}

fn read_scores(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let column = reader
        .headers()?
        .iter()
        .position(|h| h == "score")
        .ok_or_else(|| CliError::Data(format!("{}: no `score` column", path.display())))?;
    let mut scores = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let cell = record.get(column).unwrap_or("");
        let value: f64 = cell
            .trim()
            .parse()
            .map_err(|_| CliError::Data(format!("{}: row {}: bad score {cell:?}", path.display(), r + 1)))?;
        scores.push(value);
    }
    Ok(scores)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
