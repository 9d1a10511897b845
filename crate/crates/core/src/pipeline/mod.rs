//! End-to-end run: ingest, cluster on rates, label, train and evaluate the
//! classifier roster, explain the best forest, write reports and plots.
//! Every stage serializes its output so a run can resume from any stage.

mod config;
mod plot;
mod report;
mod stages;

pub use config::{ConfigError, ModelConfig, PipelineConfig, SEED_ENV};
pub use plot::{render_plot, render_svg, DependencePanel, PlotData, PlotError, PlotKind, RankPanel, DEPENDENCE_TOP};
pub use report::{
    build_report, write_atomic, write_report, ClusteringSummary, DatasetSummary, ExplanationSummary, Manifest,
    ManifestEntry, RunReport, ScreenSummary, ShapRanking, TrainingSummary, MANIFEST_SCHEMA, REPORT_SCHEMA,
};
pub use stages::{
    load_artifact, raw_predictors, run_cluster, run_explain, run_ingest, run_train, sha256_hex, ClusterArtifact,
    ExplainResult, IngestArtifact, ModelResult, PipelineError, Stage, StageFailure, TrainArtifact, CLUSTER_FILE,
    CLUSTER_SCHEMA, INGEST_FILE, INGEST_SCHEMA, TRAIN_FILE, TRAIN_SCHEMA,
};

use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub manifest: Manifest,
    /// Stage artifacts written along the way.
    pub artifacts: Vec<PathBuf>,
}

fn save<T: Serialize>(value: &T, dir: &Path, name: &str, stage: Stage, written: &[PathBuf]) -> Result<PathBuf, PipelineError> {
    let path = dir.join(name);
    let result = std::fs::create_dir_all(dir)
        .and_then(|_| write_atomic(&path, serde_json::to_string(value).expect("artifact serializes").as_bytes()));
    result.map_err(|source| PipelineError {
        stage,
        failure: StageFailure::Write { path: path.clone(), source },
        written: written.to_vec(),
    })?;
    Ok(path)
}

fn with_written(mut e: PipelineError, written: &[PathBuf]) -> PipelineError {
    let mut all = written.to_vec();
    all.append(&mut e.written);
    e.written = all;
    e
}

/// Writes `stage_ingest.json` into `dir`.
pub fn save_ingest(a: &IngestArtifact, dir: &Path) -> Result<PathBuf, PipelineError> {
    save(a, dir, INGEST_FILE, Stage::Ingest, &[])
}

pub fn save_cluster(a: &ClusterArtifact, dir: &Path) -> Result<PathBuf, PipelineError> {
    save(a, dir, CLUSTER_FILE, Stage::Cluster, &[])
}

pub fn save_train(a: &TrainArtifact, dir: &Path) -> Result<PathBuf, PipelineError> {
    save(a, dir, TRAIN_FILE, Stage::Train, &[])
}

/// Explains and writes the final report files from a training artifact.
pub fn finish_from_train(train: &TrainArtifact, dir: &Path) -> Result<(RunReport, Manifest), PipelineError> {
    let explain = run_explain(train)?;
    let report = build_report(train, explain.as_ref());
    let manifest = write_report(&report, train, explain.as_ref(), dir)?;
    Ok((report, manifest))
}

/// Runs every stage, saving each stage artifact in `config.output_dir`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunOutcome, PipelineError> {
    config.validate().map_err(|e| PipelineError::new(Stage::Config, e))?;
    let dir = &config.output_dir;
    let mut written = Vec::new();
    let ingest = run_ingest(config)?;
    written.push(save(&ingest, dir, INGEST_FILE, Stage::Ingest, &written)?);
    let cluster = run_cluster(ingest).map_err(|e| with_written(e, &written))?;
    written.push(save(&cluster, dir, CLUSTER_FILE, Stage::Cluster, &written)?);
    let train = run_train(cluster).map_err(|e| with_written(e, &written))?;
    written.push(save(&train, dir, TRAIN_FILE, Stage::Train, &written)?);
    let (report, manifest) = finish_from_train(&train, dir).map_err(|e| with_written(e, &written))?;
    Ok(RunOutcome { report, manifest, artifacts: written })
}
