use super::config::{ConfigError, PipelineConfig};
use crate::balance::{smote_oversample, BalanceError, Origin, SmoteConfig};
use crate::cluster::{assign_risk_labels, elbow_select_k, kmeans_fit, ClusterError, ElbowCurve, KMeansConfig, KMeansModel, RiskLabeling};
use crate::explain::{mda_importance, mdg_importance, shap_summary, tree_shap, ExplainError, ImportanceReport, ShapMatrix, ShapSummary};
use crate::ingest::{
    compute_rates, correlation_matrix, impute_missing, parse_county_table, predictor_table, screen_collinear,
    standardize_features, CorrelationScreenResult, CountyRecord, FeatureTable, ImputationLog, IngestError, Issue,
    Severity,
};
use crate::learn::{
    evaluate, fit_classifier, kfold_cv, predict, stratified_split, CvReport, LearnError, ModelKind, ModelSpec,
    TestReport, TrainedModel,
};
use crate::matrix::{mean, sample_sd, Matrix};
use crate::rng::{derive_seed, stream};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

pub const INGEST_SCHEMA: &str = "risklab.stage.ingest/v1";
pub const CLUSTER_SCHEMA: &str = "risklab.stage.cluster/v1";
pub const TRAIN_SCHEMA: &str = "risklab.stage.train/v1";

pub const INGEST_FILE: &str = "stage_ingest.json";
pub const CLUSTER_FILE: &str = "stage_cluster.json";
pub const TRAIN_FILE: &str = "stage_train.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Cluster,
    Train,
    Explain,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Cluster => "cluster",
            Stage::Train => "train",
            Stage::Explain => "explain",
            Stage::Report => "report",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StageFailure {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Balance(#[from] BalanceError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error("cannot read artifact {path}: {reason}")]
    BadArtifact { path: PathBuf, reason: String },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub failure: StageFailure,
    /// Files completed before the failure.
    pub written: Vec<PathBuf>,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.failure)?;
        if !self.written.is_empty() {
            let names: Vec<String> = self.written.iter().map(|p| p.display().to_string()).collect();
            write!(f, " (written so far: {})", names.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for PipelineError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.failure)
    }
}

impl PipelineError {
    pub fn new(stage: Stage, failure: impl Into<StageFailure>) -> Self {
        Self { stage, failure: failure.into(), written: Vec::new() }
    }

    /// 2 for configuration problems, 3 for bad input data, 4 for compute or
    /// output failures.
    pub fn exit_code(&self) -> i32 {
        match &self.failure {
            StageFailure::Config(_) => 2,
            StageFailure::Ingest(_) | StageFailure::BadArtifact { .. } => 3,
            _ => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestArtifact {
    pub schema: String,
    pub config: PipelineConfig,
    pub input_sha256: String,
    pub rows_read: usize,
    pub issues: Vec<Issue>,
    pub imputation: ImputationLog,
    /// Accepted records after imputation, in input order.
    pub records: Vec<CountyRecord>,
    /// Columns: positive rate, death rate.
    pub rates: Matrix,
    /// Standardized predictors that survived the collinearity screen.
    pub features: FeatureTable,
    pub screen: CorrelationScreenResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterArtifact {
    pub schema: String,
    pub ingest: IngestArtifact,
    /// What k-means saw: the rates, z-scored when configured.
    pub points: Matrix,
    pub elbow: ElbowCurve,
    pub k: usize,
    pub k_from_override: bool,
    pub model: KMeansModel,
    pub labeling: RiskLabeling,
    /// Class index per county (0 is the highest risk).
    pub classes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub position: usize,
    pub kind: ModelKind,
    pub seed: u64,
    pub cv: CvReport,
    pub test: TestReport,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainArtifact {
    pub schema: String,
    pub cluster: ClusterArtifact,
    pub smote_before_split: bool,
    pub synthetic_per_class: BTreeMap<usize, usize>,
    /// Provenance of every training row in terms of county rows.
    pub train_origins: Vec<Origin>,
    pub test_origins: Vec<Origin>,
    pub x_train: Matrix,
    pub y_train: Vec<usize>,
    pub x_test: Matrix,
    pub y_test: Vec<usize>,
    pub results: Vec<ModelResult>,
    pub models: Vec<TrainedModel>,
    /// Position of the model with the highest test accuracy.
    pub best: usize,
}

impl TrainArtifact {
    /// The best random forest by test accuracy, ties to the earlier position.
    pub fn forest_to_explain(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for r in &self.results {
            if r.kind == ModelKind::RandomForest && best.is_none_or(|b| r.test.accuracy > self.results[b].test.accuracy) {
                best = Some(r.position);
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainResult {
    pub position: usize,
    pub importance: ImportanceReport,
    pub shap: ShapMatrix,
    pub summary: ShapSummary,
    /// Unstandardized values of the explained rows.
    pub raw: Matrix,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn run_ingest(cfg: &PipelineConfig) -> Result<IngestArtifact, PipelineError> {
    let fail = |e: StageFailure| PipelineError::new(Stage::Ingest, e);
    let bytes = std::fs::read(&cfg.input_path)
        .map_err(|source| fail(IngestError::Io { path: cfg.input_path.clone(), source }.into()))?;
    let loaded = parse_county_table(bytes.as_slice()).map_err(|e| fail(e.into()))?;
    let rows_read = loaded.records.len() + loaded.rejected();
    let (records, imputation) = impute_missing(&loaded.records).map_err(|e| fail(e.into()))?;
    let mut rates = Matrix::zeros(records.len(), 2);
    for (i, r) in records.iter().enumerate() {
        let t = compute_rates(r);
        rates.set(i, 0, t.positive_rate);
        rates.set(i, 1, t.death_rate);
    }
    let raw = predictor_table(&records, cfg.climate_one_hot).map_err(|e| fail(e.into()))?;
    let standardized = standardize_features(&raw).map_err(|e| fail(e.into()))?;
    let corr = correlation_matrix(&standardized);
    let screen = screen_collinear(&corr, &standardized.column_names, cfg.correlation_threshold);
    let features = standardized.retain_columns(&screen.kept);
    Ok(IngestArtifact {
        schema: INGEST_SCHEMA.into(),
        config: cfg.clone(),
        input_sha256: sha256_hex(&bytes),
        rows_read,
        issues: loaded.issues,
        imputation,
        records,
        rates,
        features,
        screen,
    })
}

fn zscore_columns(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for j in 0..m.cols() {
        let col = m.column(j);
        let (mu, sd) = (mean(&col), sample_sd(&col));
        for i in 0..m.rows() {
            out.set(i, j, if sd > 0.0 { (col[i] - mu) / sd } else { 0.0 });
        }
    }
    out
}

pub fn run_cluster(ingest: IngestArtifact) -> Result<ClusterArtifact, PipelineError> {
    let fail = |e: StageFailure| PipelineError::new(Stage::Cluster, e);
    let cfg = &ingest.config;
    let points = if cfg.standardize_cluster_features { zscore_columns(&ingest.rates) } else { ingest.rates.clone() };
    let km = KMeansConfig { restarts: cfg.kmeans_restarts, ..KMeansConfig::default() };
    let [lo, hi] = cfg.k_range;
    let hi = hi.min(points.rows());
    let elbow = elbow_select_k(&points, lo, hi, cfg.seed, &km).map_err(|e| fail(e.into()))?;
    let k = cfg.k_override.unwrap_or(elbow.chosen_k);
    let model = kmeans_fit(&points, k, cfg.seed, &km).map_err(|e| fail(e.into()))?;
    let labeling = assign_risk_labels(&model, &ingest.rates);
    let classes = labeling.classes(&model.assignments);
    Ok(ClusterArtifact {
        schema: CLUSTER_SCHEMA.into(),
        k_from_override: cfg.k_override.is_some(),
        ingest,
        points,
        elbow,
        k,
        model,
        labeling,
        classes,
    })
}

fn remap(origins: &[Origin], rows: &[usize]) -> Vec<Origin> {
    origins
        .iter()
        .map(|o| match *o {
            Origin::Original { row } => Origin::Original { row: rows[row] },
            Origin::Synthetic { base, neighbor } => Origin::Synthetic { base: rows[base], neighbor: rows[neighbor] },
        })
        .collect()
}

pub fn run_train(cluster: ClusterArtifact) -> Result<TrainArtifact, PipelineError> {
    let fail = |e: StageFailure| PipelineError::new(Stage::Train, e);
    let cfg = cluster.ingest.config.clone();
    let x = &cluster.ingest.features.values;
    let y = &cluster.classes;
    let smote = SmoteConfig { k_neighbors: cfg.smote_k_neighbors, seed: derive_seed(cfg.seed, stream::SMOTE, 0) };

    // (rows fit by the final models, rows used for CV, SMOTE inside CV folds)
    let (x_train, y_train, x_test, y_test, train_origins, test_origins, synthetic, cv_x, cv_y, cv_smote);
    if cfg.smote_before_split {
        let bal = smote_oversample(x, y, &smote).map_err(|e| fail(e.into()))?;
        let (tr, te) = stratified_split(&bal.y, cfg.test_fraction, cfg.seed).map_err(|e| fail(e.into()))?;
        x_train = bal.x.select_rows(&tr);
        y_train = tr.iter().map(|&i| bal.y[i]).collect::<Vec<_>>();
        x_test = bal.x.select_rows(&te);
        y_test = te.iter().map(|&i| bal.y[i]).collect::<Vec<_>>();
        train_origins = tr.iter().map(|&i| bal.origins[i]).collect::<Vec<_>>();
        test_origins = te.iter().map(|&i| bal.origins[i]).collect::<Vec<_>>();
        synthetic = bal.synthetic_per_class;
        cv_x = x_train.clone();
        cv_y = y_train.clone();
        cv_smote = None;
    } else {
        let (tr, te) = stratified_split(y, cfg.test_fraction, cfg.seed).map_err(|e| fail(e.into()))?;
        let xo = x.select_rows(&tr);
        let yo: Vec<usize> = tr.iter().map(|&i| y[i]).collect();
        let bal = smote_oversample(&xo, &yo, &smote).map_err(|e| fail(e.into()))?;
        x_train = bal.x;
        y_train = bal.y;
        train_origins = remap(&bal.origins, &tr);
        x_test = x.select_rows(&te);
        y_test = te.iter().map(|&i| y[i]).collect();
        test_origins = te.iter().map(|&row| Origin::Original { row }).collect();
        synthetic = bal.synthetic_per_class;
        cv_x = xo;
        cv_y = yo;
        cv_smote = Some(smote);
    }

    let mut results = Vec::with_capacity(cfg.models.len());
    let mut models = Vec::with_capacity(cfg.models.len());
    for (position, m) in cfg.models.iter().enumerate() {
        let seed = derive_seed(cfg.seed, stream::MODEL, position as u64);
        let spec = ModelSpec { kind: m.kind, seed, hyper: m.hyper.clone() };
        let cv = kfold_cv(&spec, &cv_x, &cv_y, cfg.cv_folds, cfg.seed, cv_smote.as_ref()).map_err(|e| fail(e.into()))?;
        let model = fit_classifier(&spec, &x_train, &y_train).map_err(|e| fail(e.into()))?;
        let pred = predict(&model, &x_test).map_err(|e| fail(e.into()))?;
        let test = evaluate(&pred.labels, &y_test).map_err(|e| fail(e.into()))?;
        results.push(ModelResult { position, kind: m.kind, seed, cv, test, warnings: model.warnings.clone() });
        models.push(model);
    }
    let mut best = 0;
    for r in &results {
        if r.test.accuracy > results[best].test.accuracy {
            best = r.position;
        }
    }
    Ok(TrainArtifact {
        schema: TRAIN_SCHEMA.into(),
        cluster,
        smote_before_split: cfg.smote_before_split,
        synthetic_per_class: synthetic,
        train_origins,
        test_origins,
        x_train,
        y_train,
        x_test,
        y_test,
        results,
        models,
        best,
    })
}

/// Importance on the forest's own training rows; SHAP on every county.
pub fn run_explain(train: &TrainArtifact) -> Result<Option<ExplainResult>, PipelineError> {
    let fail = |e: ExplainError| PipelineError::new(Stage::Explain, e);
    let Some(position) = train.forest_to_explain() else {
        return Ok(None);
    };
    let forest = train.models[position].forest().expect("position holds a random forest");
    let ingest = &train.cluster.ingest;
    let cfg = &ingest.config;
    let mda = mda_importance(forest, &train.x_train, &train.y_train, cfg.mda_repetitions, cfg.seed).map_err(fail)?;
    let mdg = mdg_importance(forest);
    let names = ingest.features.column_names.clone();
    let importance = ImportanceReport::new(names.clone(), &mda, mdg);
    let shap = tree_shap(forest, &ingest.features.values).map_err(fail)?;
    let raw = raw_predictors(ingest).map_err(|e| PipelineError::new(Stage::Explain, e))?;
    let summary = shap_summary(&shap, &raw, &names).map_err(fail)?;
    Ok(Some(ExplainResult { position, importance, shap, summary, raw }))
}

/// Unstandardized values of the screened predictor columns, exactly as read.
pub fn raw_predictors(ingest: &IngestArtifact) -> Result<Matrix, IngestError> {
    let raw = predictor_table(&ingest.records, ingest.config.climate_one_hot)?;
    let idx: Vec<usize> = ingest
        .features
        .column_names
        .iter()
        .map(|n| raw.column_names.iter().position(|c| c == n).expect("screened columns come from the predictor table"))
        .collect();
    Ok(raw.values.select_cols(&idx))
}

pub fn load_artifact<T: serde::de::DeserializeOwned>(path: &Path, schema: &str) -> Result<T, StageFailure> {
    let bad = |reason: String| StageFailure::BadArtifact { path: path.to_path_buf(), reason };
    let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    match value.get("schema").and_then(|s| s.as_str()) {
        Some(s) if s == schema => {}
        other => return Err(bad(format!("expected schema {schema}, found {}", other.unwrap_or("none")))),
    }
    serde_json::from_value(value).map_err(|e| bad(e.to_string()))
}

/// Count of rejected and warning rows, in that order.
pub fn issue_counts(issues: &[Issue]) -> (usize, usize) {
    let rejected = issues.iter().filter(|i| i.severity == Severity::Rejected).count();
    (rejected, issues.len() - rejected)
}
