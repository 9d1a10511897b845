use crate::learn::{Hyperparameters, ModelKind};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SEED_ENV: &str = "RISKLAB_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default)]
    pub hyper: Hyperparameters,
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        Self { kind, hyper: Hyperparameters::default() }
    }
}

fn default_models() -> Vec<ModelConfig> {
    [
        ModelKind::Mlr,
        ModelKind::Lda,
        ModelKind::Qda,
        ModelKind::Knn,
        ModelKind::SvmLinear,
        ModelKind::SvmRbf,
        ModelKind::SvmPoly,
        ModelKind::RandomForest,
    ]
    .into_iter()
    .map(ModelConfig::new)
    .collect()
}

/// Field names match the JSON config file. Relative paths are resolved
/// against the config file's directory by [`PipelineConfig::from_file`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input_path: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub correlation_threshold: f64,
    /// Inclusive range of k tried by the elbow search.
    pub k_range: [usize; 2],
    pub k_override: Option<usize>,
    pub standardize_cluster_features: bool,
    /// Oversample the whole dataset before the train/test split.
    pub smote_before_split: bool,
    pub test_fraction: f64,
    pub cv_folds: usize,
    pub models: Vec<ModelConfig>,
    pub climate_one_hot: bool,
    pub smote_k_neighbors: usize,
    pub mda_repetitions: usize,
    pub kmeans_restarts: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input_path: PathBuf::from("counties.csv"),
            output_dir: PathBuf::from("out"),
            seed: 42,
            correlation_threshold: 0.7,
            k_range: [1, 10],
            k_override: None,
            standardize_cluster_features: false,
            smote_before_split: false,
            test_fraction: 0.2,
            cv_folds: 10,
            models: default_models(),
            climate_one_hot: false,
            smote_k_neighbors: 5,
            mda_repetitions: 5,
            kmeans_restarts: 10,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl PipelineConfig {
    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, applies the seed override from the environment, resolves
    /// relative paths and validates.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        cfg.apply_env()?;
        if let Some(dir) = path.parent() {
            if cfg.input_path.is_relative() {
                cfg.input_path = dir.join(&cfg.input_path);
            }
            if cfg.output_dir.is_relative() {
                cfg.output_dir = dir.join(&cfg.output_dir);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("{SEED_ENV}=`{v}` is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.correlation_threshold > 0.0 && self.correlation_threshold <= 1.0) {
            return bad(format!("correlation_threshold {} outside (0, 1]", self.correlation_threshold));
        }
        let [lo, hi] = self.k_range;
        if lo < 1 || hi > 50 || lo > hi {
            return bad(format!("k_range [{lo}, {hi}] must satisfy 1 ≤ min ≤ max ≤ 50"));
        }
        if let Some(k) = self.k_override {
            if !(1..=50).contains(&k) {
                return bad(format!("k_override {k} outside [1, 50]"));
            }
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction {} outside (0, 1)", self.test_fraction));
        }
        if self.cv_folds < 2 {
            return bad(format!("cv_folds must be ≥ 2, got {}", self.cv_folds));
        }
        if self.models.is_empty() {
            return bad("models list is empty".into());
        }
        if self.smote_k_neighbors == 0 {
            return bad("smote_k_neighbors must be ≥ 1".into());
        }
        if self.mda_repetitions == 0 {
            return bad("mda_repetitions must be ≥ 1".into());
        }
        if self.kmeans_restarts == 0 {
            return bad("kmeans_restarts must be ≥ 1".into());
        }
        for (i, m) in self.models.iter().enumerate() {
            crate::learn::ModelSpec::new(m.kind, 0)
                .with_hyper(m.hyper.clone())
                .validate()
                .map_err(|e| ConfigError::Invalid(format!("models[{i}] ({}): {e}", m.kind)))?;
        }
        Ok(())
    }
}
