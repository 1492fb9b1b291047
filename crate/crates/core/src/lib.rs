//! Learning binary classifiers from On/Off region tags by maximizing the
//! Li & Ma significance of detection.
//!
//! Region tags act as class-conditionally noisy labels: the On region holds
//! an excess of true positives over the (scaled) Off regions. The crate
//! provides the significance statistic and threshold tuning, a k-means
//! detector, significance-split decision trees, bagged ensembles of both, and
//! the evaluation protocols used to validate them.

pub mod artifact;
pub mod cluster;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod model;
pub mod rng;
pub mod significance;
pub mod synth;
pub mod table;
pub mod tree;

pub use cluster::{ClusterDetector, KMeansParams};
pub use ensemble::{BaseParams, EnsembleModel, EnsembleParams};
pub use error::{Error, Result};
pub use model::{FittedModel, ModelSpec, ThresholdSource};
pub use significance::{
    alpha_from_p_minus, li_ma_significance, significance_at_threshold, significance_gradient, tune_threshold,
    CountPair, ScoredPredictions, SignificanceConfig, ThresholdResult,
};
pub use table::{CsvSchema, EventTable, Label, Region};
pub use tree::{Criterion, SigTree, TreeParams};
