use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::significance::CountPair;

/// Per-fold bookkeeping of a cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldDiagnostics {
    pub fold: usize,
    pub n_groups: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub train_counts: CountPair,
    pub test_counts: CountPair,
    /// Decision threshold the fold model applied to its hold-out scores.
    pub threshold: f64,
    /// Significance of the fold's own hold-out decisions.
    pub sigma_test: f64,
    /// Training rows without any out-of-bag member (ensembles only).
    pub oob_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: String,
    pub n_rows: usize,
    pub n_folds: usize,
    pub repeats: usize,
    /// Significance of the first repeat's pooled predictions.
    pub sigma: Option<f64>,
    pub sigma_mean: Option<f64>,
    pub sigma_std: Option<f64>,
    pub sigmas: Vec<f64>,
    pub f1: Option<f64>,
    pub f1_std: Option<f64>,
    /// F1 of the same models thresholded with the help of clean labels.
    pub f1_clean_oracle: Option<f64>,
    pub auc: Option<f64>,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub folds: Vec<FoldDiagnostics>,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    let r = (x * scale).round() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Significances and thresholds keep 6 decimals, other reals 4.
fn round_value(key: &str, v: &mut Value) {
    let decimals = if key.starts_with("sigma") || key.starts_with("threshold") {
        6
    } else {
        4
    };
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                *v = serde_json::Number::from_f64(round_to(x, decimals)).map_or(Value::Null, Value::Number);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|item| round_value(key, item)),
        Value::Object(map) => map.iter_mut().for_each(|(k, item)| round_value(k, item)),
        _ => {}
    }
}

impl EvalReport {
    /// Deterministic, key-sorted JSON document.
    pub fn to_document(&self) -> String {
        let mut value = serde_json::to_value(self).expect("report serializes");
        round_value("", &mut value);
        let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
        text.push('\n');
        text
    }
}
