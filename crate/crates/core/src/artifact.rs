//! Versioned on-disk model artifacts.
//!
//! An artifact is a JSON document with sorted keys holding the fitted model,
//! the spec it was fitted with, its decision threshold, seed and the feature
//! schema it expects. Saving a loaded artifact reproduces the file byte for
//! byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ensemble::BaseKind;
use crate::error::{Error, Result};
use crate::model::{FittedModel, ModelSpec};
use crate::table::EventTable;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub names: Vec<String>,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub base_kind: BaseKind,
    pub spec: ModelSpec,
    pub threshold: f64,
    pub seed: u64,
    pub features: FeatureSchema,
    pub model: FittedModel,
}

impl ModelArtifact {
    pub fn new(model: FittedModel, spec: ModelSpec, seed: u64, feature_names: Vec<String>) -> Result<Self> {
        if feature_names.len() != model.n_features() {
            return Err(Error::DimensionMismatch {
                expected: model.n_features(),
                got: feature_names.len(),
            });
        }
        Ok(ModelArtifact {
            format_version: FORMAT_VERSION,
            base_kind: spec.base.kind(),
            spec,
            threshold: model.threshold(),
            seed,
            features: FeatureSchema {
                n_features: feature_names.len(),
                names: feature_names,
            },
            model,
        })
    }

    /// Errors unless `table` has exactly the features the model was fitted on.
    pub fn check_schema(&self, table: &EventTable) -> Result<()> {
        if table.feature_names() != self.features.names.as_slice() {
            return Err(Error::Schema(format!(
                "model expects features [{}], table has [{}]",
                self.features.names.join(", "),
                table.feature_names().join(", ")
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let value = serde_json::to_value(self).map_err(|e| Error::Corrupt(e.to_string()))?;
        let mut s = serde_json::to_string_pretty(&value).map_err(|e| Error::Corrupt(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Corrupt(format!("not a model artifact: {e}")))?;
        let version = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Corrupt("missing format_version".into()))?;
        if version != u64::from(FORMAT_VERSION) {
            return Err(Error::Version {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: FORMAT_VERSION,
            });
        }
        let artifact: ModelArtifact =
            serde_json::from_value(value).map_err(|e| Error::Corrupt(format!("invalid model artifact: {e}")))?;
        artifact.validate()?;
        Ok(artifact)
    }

    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let corrupt = |m: &str| Err(Error::Corrupt(m.into()));
        if self.features.n_features != self.features.names.len() || self.model.n_features() != self.features.n_features
        {
            return corrupt("feature schema does not match the model");
        }
        if self.base_kind != self.spec.base.kind() {
            return corrupt("base kind does not match the spec");
        }
        if self.threshold.to_bits() != self.model.threshold().to_bits() {
            return corrupt("threshold does not match the model");
        }
        let is_ensemble = matches!(self.model, FittedModel::Ensemble(_));
        if is_ensemble != self.spec.ensemble.is_some() {
            return corrupt("model type does not match the spec");
        }
        Ok(())
    }
}

pub fn save_model(artifact: &ModelArtifact, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, artifact.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelArtifact> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelArtifact::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::BaseParams;
    use crate::model::fit_model;
    use crate::significance::SignificanceConfig;
    use crate::synth::{wobble_table, WobbleConfig};
    use crate::tree::Criterion;

    fn artifacts() -> Vec<(ModelArtifact, EventTable)> {
        let t = wobble_table(&WobbleConfig::signal(600), 3);
        let cfg = SignificanceConfig::new(0.2).unwrap();
        let specs = [
            ModelSpec::single(BaseParams::tree(Criterion::Noisy, 3), cfg),
            ModelSpec::single(BaseParams::kmeans(6), cfg),
            ModelSpec::ensemble(BaseParams::tree(Criterion::LiMa, 3), 6, cfg),
            ModelSpec::ensemble(BaseParams::kmeans(4), 4, cfg),
        ];
        specs
            .iter()
            .map(|spec| {
                let m = fit_model(&t, spec, 5).unwrap();
                (
                    ModelArtifact::new(m, *spec, 5, t.feature_names().to_vec()).unwrap(),
                    t.clone(),
                )
            })
            .collect()
    }

    #[test]
    fn round_trip_is_byte_identical_and_predicts_the_same() {
        let dir = tempfile::tempdir().unwrap();
        for (i, (a, t)) in artifacts().into_iter().enumerate() {
            let p = dir.path().join(format!("m{i}.json"));
            save_model(&a, &p).unwrap();
            let first = fs::read(&p).unwrap();
            let back = load_model(&p).unwrap();
            assert_eq!(back, a);
            save_model(&back, &p).unwrap();
            assert_eq!(fs::read(&p).unwrap(), first);
            for r in 0..t.n_rows() {
                assert_eq!(back.model.score(t.row(r)).unwrap(), a.model.score(t.row(r)).unwrap());
            }
        }
    }

    #[test]
    fn rejects_bad_versions_truncation_and_schema() {
        let (a, t) = artifacts().remove(0);
        let json = a.to_json().unwrap();
        let bumped = json.replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(matches!(
            ModelArtifact::from_json(&bumped),
            Err(Error::Version { found: 2, expected: 1 })
        ));
        assert!(matches!(
            ModelArtifact::from_json(&json[..json.len() / 2]),
            Err(Error::Corrupt(_))
        ));
        assert!(matches!(ModelArtifact::from_json("{}"), Err(Error::Corrupt(_))));

        a.check_schema(&t).unwrap();
        let renamed = EventTable::new(
            (0..t.n_features()).map(|j| format!("z{j}")).collect(),
            t.features().to_vec(),
            t.regions().to_vec(),
            None,
            None,
        )
        .unwrap();
        assert!(matches!(a.check_schema(&renamed), Err(Error::Schema(_))));
    }
}
