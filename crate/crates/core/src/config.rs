//! Run configuration: a TOML document naming the dataset, its schema, the
//! lattice features and the detector parameters.
//!
//! ```toml
//! output_dir = "out"
//!
//! [dataset]
//! paths = ["discharges.csv"]
//!
//! [schema]
//! feature_columns = ["CCS Diagnosis Description", "Race", "Ethnicity", "Age Group"]
//! year_column = "Discharge Year"
//! baseline_year = 2009
//!
//! [piks]
//! years = [2009, 2010, 2011, 2012, 2013, 2014, 2015]
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregate::{Measure, MAX_FEATURES};
use crate::baselines::{FeatureBaggingParams, IsolationForestParams};
use crate::cluster::KMeansParams;
use crate::error::{Error, Result};
use crate::ingest::{CodeCrosswalk, DatasetSchema, UnmappedPolicy};
use crate::lattice::PiksConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub paths: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrosswalkConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub unmapped_policy: UnmappedPolicy,
}

fn default_threshold() -> usize {
    50
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiksSection {
    /// Defaults to the schema's feature columns.
    #[serde(default)]
    pub features: Vec<String>,
    pub years: Vec<i32>,
    #[serde(default = "default_threshold")]
    pub row_threshold: usize,
    #[serde(default)]
    pub measure: Measure,
    #[serde(default = "default_true")]
    pub pruning_enabled: bool,
    #[serde(default)]
    pub kmeans: KMeansParams,
}

fn default_bins() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankingConfig {
    pub measure: String,
    #[serde(default = "default_bins")]
    pub n_bins: usize,
    /// Defaults to the schema's feature columns.
    #[serde(default)]
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    /// Lattice node to cross-check; defaults to the first lattice feature.
    #[serde(default)]
    pub node: Vec<String>,
    #[serde(default)]
    pub top_m: Option<usize>,
    #[serde(default)]
    pub isolation_forest: IsolationForestParams,
    #[serde(default)]
    pub feature_bagging: FeatureBaggingParams,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("piks-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub schema: DatasetSchema,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crosswalk: Option<CrosswalkConfig>,
    pub piks: PiksSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_ranking: Option<RankingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baselines: Option<BaselineConfig>,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| format!("config (bytes {}..{})", s.start, s.end))
                .unwrap_or_else(|| "config".to_string());
            Error::config(field, e.message().to_string())
        })?;
        cfg.resolve_paths(base_dir);
        cfg.apply_defaults();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.dataset.paths.iter_mut().for_each(fix);
        if let Some(cw) = &mut self.crosswalk {
            fix(&mut cw.path);
        }
        fix(&mut self.output_dir);
    }

    fn apply_defaults(&mut self) {
        if self.piks.features.is_empty() {
            self.piks.features = self.schema.feature_columns.clone();
        }
        if let Some(r) = &mut self.feature_ranking {
            if r.candidates.is_empty() {
                r.candidates = self.schema.feature_columns.clone();
            }
        }
        if let Some(b) = &mut self.baselines {
            if b.node.is_empty() {
                b.node = self.piks.features.iter().take(1).cloned().collect();
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schema
            .validate()
            .map_err(|e| Error::config("schema", e.to_string()))?;
        if self.dataset.paths.is_empty() {
            return Err(Error::config("dataset.paths", "at least one dataset file is required"));
        }
        for (i, p) in self.dataset.paths.iter().enumerate() {
            if !p.is_file() {
                return Err(Error::config(
                    format!("dataset.paths[{i}]"),
                    format!("file not found: {}", p.display()),
                ));
            }
        }
        if let Some(cw) = &self.crosswalk {
            if !cw.path.is_file() {
                return Err(Error::config(
                    "crosswalk.path",
                    format!("file not found: {}", cw.path.display()),
                ));
            }
            if self.schema.code_column.is_none() {
                return Err(Error::config("schema.code_column", "required when a crosswalk is given"));
            }
        }

        let in_schema = |f: &String| self.schema.feature_columns.contains(f);
        let piks = &self.piks;
        if piks.features.len() > MAX_FEATURES {
            return Err(Error::config(
                "piks.features",
                format!("at most {MAX_FEATURES} lattice features are supported"),
            ));
        }
        for (i, f) in piks.features.iter().enumerate() {
            if !in_schema(f) {
                return Err(Error::config(
                    format!("piks.features[{i}]"),
                    format!("feature `{f}` is not in schema.feature_columns"),
                ));
            }
            if piks.features[..i].contains(f) {
                return Err(Error::config(format!("piks.features[{i}]"), format!("duplicate feature `{f}`")));
            }
        }
        if piks.years.is_empty() {
            return Err(Error::config("piks.years", "at least one year is required"));
        }
        if !piks.years.contains(&self.schema.baseline_year) {
            return Err(Error::config(
                "piks.years",
                format!("baseline year {} is not listed", self.schema.baseline_year),
            ));
        }
        if piks.row_threshold == 0 {
            return Err(Error::config("piks.row_threshold", "must be at least 1"));
        }
        if let Measure::Mean { field } = &piks.measure {
            if self.schema.measure_index(field).is_none() {
                return Err(Error::config(
                    "piks.measure.field",
                    format!("`{field}` is not in schema.measure_columns"),
                ));
            }
        }
        piks.kmeans
            .validate()
            .map_err(|e| Error::config("piks.kmeans", e.to_string()))?;

        if let Some(r) = &self.feature_ranking {
            if self.schema.measure_index(&r.measure).is_none() {
                return Err(Error::config(
                    "feature_ranking.measure",
                    format!("`{}` is not in schema.measure_columns", r.measure),
                ));
            }
            if r.n_bins < 2 {
                return Err(Error::config("feature_ranking.n_bins", "must be at least 2"));
            }
            for (i, c) in r.candidates.iter().enumerate() {
                if !in_schema(c) {
                    return Err(Error::config(
                        format!("feature_ranking.candidates[{i}]"),
                        format!("feature `{c}` is not in schema.feature_columns"),
                    ));
                }
            }
        }
        if let Some(b) = &self.baselines {
            for (i, f) in b.node.iter().enumerate() {
                if !piks.features.contains(f) {
                    return Err(Error::config(
                        format!("baselines.node[{i}]"),
                        format!("feature `{f}` is not a lattice feature"),
                    ));
                }
            }
            if b.isolation_forest.n_trees == 0 {
                return Err(Error::config("baselines.isolation_forest.n_trees", "must be at least 1"));
            }
            if b.isolation_forest.subsample < 2 {
                return Err(Error::config("baselines.isolation_forest.subsample", "must be at least 2"));
            }
            if b.feature_bagging.rounds == 0 {
                return Err(Error::config("baselines.feature_bagging.rounds", "must be at least 1"));
            }
            if b.feature_bagging.lof.k_neighbors == 0 {
                return Err(Error::config(
                    "baselines.feature_bagging.lof.k_neighbors",
                    "must be at least 1",
                ));
            }
        }
        Ok(())
    }

    pub fn piks_config(&self) -> PiksConfig {
        PiksConfig {
            features: self.piks.features.clone(),
            row_threshold: self.piks.row_threshold,
            measure: self.piks.measure.clone(),
            years: self.piks.years.clone(),
            baseline_year: self.schema.baseline_year,
            kmeans: self.piks.kmeans.clone(),
            pruning_enabled: self.piks.pruning_enabled,
        }
    }

    pub fn load_crosswalk(&self) -> Result<Option<CodeCrosswalk>> {
        self.crosswalk
            .as_ref()
            .map(|cw| CodeCrosswalk::load(&cw.path, self.schema.delimiter, cw.unmapped_policy))
            .transpose()
    }

    /// Hex SHA-256 of the canonical JSON form (object keys sorted). The
    /// output directory is left out: it does not affect results.
    pub fn config_hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
        }
        let canonical = serde_json::to_string(&value).expect("value serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    RunConfig::from_toml(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    const MINIMAL: &str = r#"
[dataset]
paths = ["data.csv"]

[schema]
feature_columns = ["Dx", "Race"]
year_column = "Year"
baseline_year = 2009

[piks]
years = [2009, 2010, 2011]
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "data.csv", "Dx,Race,Year\n");
        let cfg = load_config(&write(dir.path(), "run.toml", MINIMAL)).unwrap();
        assert_eq!(cfg.piks.kmeans.k, 8);
        assert_eq!(cfg.piks.kmeans.small_cluster_max, 2);
        assert_eq!(cfg.piks.row_threshold, 50);
        assert!(cfg.piks.pruning_enabled);
        assert_eq!(cfg.piks.features, vec!["Dx", "Race"]);
        assert_eq!(cfg.dataset.paths[0], dir.path().join("data.csv"));
        assert_eq!(cfg.schema.delimiter, ',');
    }

    #[test]
    fn unknown_feature_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "data.csv", "Dx,Race,Year\n");
        let text = MINIMAL.replace("years = [2009, 2010, 2011]", "years = [2009]\nfeatures = [\"Dx\", \"Sex\"]");
        let err = load_config(&write(dir.path(), "run.toml", &text)).unwrap_err();
        match &err {
            Error::Config { field, message } => {
                assert_eq!(field, "piks.features[1]");
                assert!(message.contains("Sex"));
            }
            e => panic!("unexpected {e}"),
        }
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn missing_dataset_file() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_config(&write(dir.path(), "run.toml", MINIMAL)).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "dataset.paths[0]"));
    }

    #[test]
    fn round_trip_and_hash() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "data.csv", "Dx,Race,Year\n");
        let text = format!(
            "{MINIMAL}\n[feature_ranking]\nmeasure = \"Cost\"\n\n[baselines]\ntop_m = 3\n"
        )
        .replace("baseline_year = 2009", "baseline_year = 2009\nmeasure_columns = [{ name = \"Cost\", kind = \"currency\" }]");
        let a = load_config(&write(dir.path(), "run.toml", &text)).unwrap();
        let b = load_config(&write(dir.path(), "again.toml", &a.to_toml().unwrap())).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.config_hash(), b.config_hash());
        assert_eq!(b.baselines.as_ref().unwrap().node, vec!["Dx"]);

        // field order in the file does not matter
        let reordered = "[piks]\nyears = [2009, 2010, 2011]\n\n[schema]\nyear_column = \"Year\"\nbaseline_year = 2009\nfeature_columns = [\"Dx\", \"Race\"]\n\n[dataset]\npaths = [\"data.csv\"]\n";
        let c = load_config(&write(dir.path(), "c.toml", reordered)).unwrap();
        let m = load_config(&write(dir.path(), "m.toml", MINIMAL)).unwrap();
        assert_eq!(c.config_hash(), m.config_hash());
        assert_eq!(m.config_hash().len(), 64);
    }

    #[test]
    fn rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "data.csv", "Dx,Race,Year\n");
        let text = MINIMAL.replace("[piks]", "[piks]\nthreshold = 3");
        assert!(load_config(&write(dir.path(), "run.toml", &text)).is_err());
    }
}
